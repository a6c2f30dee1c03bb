//! Numerical checks of the functional Itô formula
//!
//! `F_t - F_0 = ∫ ∂₀F_r dr + Σᵢ ∫ ∂ᵢF_{r-} dXⁱ_r + ½ Σᵢⱼ ∫ ∂ᵢⱼF_{r-} d[Xⁱ, Xʲ]_r`
//!
//! along a partition, plus the diagnostics around it: the space/time split of
//! `F_t - F_0` on the piecewise-constant approximation, ensemble convergence
//! reports and the heat operator.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bk::{quad_variation, BkConfig};
use crate::error::{Error, Result};
use crate::functional::{numeric_bundle, require_causal, CausalFunctional, DerivativeBundle};
use crate::path::{CadlagPath, Partition};
use crate::simulate::{generate, GeneratorSpec};

#[derive(Debug, Clone, Default)]
pub struct ItoOptions {
    /// Use finite differences when the functional has no analytic bundle.
    pub numeric_fallback: bool,
    pub h_time: Option<f64>,
    pub h_space: Option<f64>,
}

/// The three cumulative sums of the right-hand side on the partition points.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoRhs {
    pub times: Vec<f64>,
    /// `∫ ∂₀F dr`, left Riemann sums.
    pub time_term: Vec<f64>,
    /// `Σᵢ ∫ ∂ᵢF₋ dXⁱ`, left-point sums.
    pub drift_term: Vec<f64>,
    /// `½ Σᵢⱼ ∫ ∂ᵢⱼF₋ dBⁱʲ` against the BK quadratic variation.
    pub trace_term: Vec<f64>,
}

impl ItoRhs {
    pub fn total(&self) -> Vec<f64> {
        (0..self.times.len())
            .map(|k| self.time_term[k] + self.drift_term[k] + self.trace_term[k])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItoReport {
    /// `F_t - F_0` on the partition.
    pub lhs: CadlagPath,
    pub rhs: CadlagPath,
    pub residual_sup: f64,
    pub components: ItoRhs,
}

impl ItoReport {
    /// CSV with header `t,lhs,rhs,residual`.
    pub fn write_trace_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,lhs,rhs,residual")?;
        for (k, &t) in self.lhs.times().iter().enumerate() {
            let (l, r) = (self.lhs.values()[k], self.rhs.values()[k]);
            writeln!(out, "{t},{l},{r},{}", l - r)?;
        }
        Ok(())
    }
}

fn partition_times(path: &CadlagPath, partition: &Partition) -> Vec<f64> {
    partition.times().iter().copied().take_while(|&t| t <= path.horizon()).collect()
}

fn bundles(
    f: &CausalFunctional,
    path: &CadlagPath,
    times: &[f64],
    opts: &ItoOptions,
) -> Result<(Vec<DerivativeBundle>, Vec<DerivativeBundle>)> {
    if f.has_analytic() {
        return Ok((f.analytic_trajectory(path, times)?, f.predictable_bundles(path, times)?));
    }
    if !opts.numeric_fallback {
        return Err(Error::MissingBundle(f.label()));
    }
    let numeric = |t: f64, p: &CadlagPath| numeric_bundle(f, t, p, opts.h_time, opts.h_space);
    let left = times[..times.len() - 1].iter().map(|&t| numeric(t, path)).collect::<Result<Vec<_>>>()?;
    let predictable = times
        .windows(2)
        .map(|w| numeric(w[1], &path.stop(w[0])?))
        .collect::<Result<Vec<_>>>()?;
    Ok((left, predictable))
}

/// The right-hand side of the functional Itô formula on `partition`.
///
/// `∂₀F` is sampled at `(t_{k-1}, ω)`; `∂ᵢF₋` and `∂ᵢⱼF₋` at
/// `(t_k, ω_{∧t_{k-1}})`, the left limit seen from the frozen path. Quadratic
/// variation increments come from [`quad_variation`] under `cfg`.
pub fn ito_rhs(
    f: &CausalFunctional,
    path: &CadlagPath,
    partition: &Partition,
    cfg: &BkConfig,
) -> Result<ItoRhs> {
    ito_rhs_with(f, path, partition, cfg, &ItoOptions::default())
}

pub fn ito_rhs_with(
    f: &CausalFunctional,
    path: &CadlagPath,
    partition: &Partition,
    cfg: &BkConfig,
    opts: &ItoOptions,
) -> Result<ItoRhs> {
    let times = partition_times(path, partition);
    let d = path.dim();
    let (left, predictable) = bundles(f, path, &times, opts)?;

    let mut qv: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; d]; d];
    for i in 0..d {
        for j in i..d {
            if predictable.iter().any(|b| b.hess[(i, j)] != 0.0 || b.hess[(j, i)] != 0.0) {
                let b = quad_variation(path, i, j, cfg)?.path;
                let sampled: Vec<f64> = times.iter().map(|&t| b.eval(t).map(|v| v[0])).collect::<Result<_>>()?;
                qv[i][j] = Some(sampled.clone());
                qv[j][i] = Some(sampled);
            }
        }
    }

    let x: Vec<&[f64]> = times.iter().map(|&t| path.eval(t)).collect::<Result<_>>()?;
    let n = times.len();
    let (mut time_term, mut drift_term, mut trace_term) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 1..n {
        let b = &predictable[k - 1];
        let dt = times[k] - times[k - 1];
        let mut drift = 0.0;
        for i in 0..d {
            drift += b.grad[i] * (x[k][i] - x[k - 1][i]);
        }
        let mut trace = 0.0;
        for i in 0..d {
            for j in 0..d {
                if let Some(q) = &qv[i][j] {
                    trace += b.hess[(i, j)] * (q[k] - q[k - 1]);
                }
            }
        }
        time_term[k] = time_term[k - 1] + left[k - 1].d0 * dt;
        drift_term[k] = drift_term[k - 1] + drift;
        trace_term[k] = trace_term[k - 1] + 0.5 * trace;
    }
    Ok(ItoRhs { times, time_term, drift_term, trace_term })
}

pub fn ito_residual(
    f: &CausalFunctional,
    path: &CadlagPath,
    partition: &Partition,
    cfg: &BkConfig,
) -> Result<ItoReport> {
    ito_residual_with(f, path, partition, cfg, &ItoOptions::default())
}

pub fn ito_residual_with(
    f: &CausalFunctional,
    path: &CadlagPath,
    partition: &Partition,
    cfg: &BkConfig,
    opts: &ItoOptions,
) -> Result<ItoReport> {
    let components = ito_rhs_with(f, path, partition, cfg, opts)?;
    let times = &components.times;
    let values = f.trajectory(path, times)?;
    let lhs: Vec<f64> = values.iter().map(|v| v - values[0]).collect();
    let rhs = components.total();
    let residual_sup = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let grid = Partition::new(times.clone())?;
    let step = |v: Vec<f64>| CadlagPath::scalar(grid.clone(), v)?.with_horizon(path.horizon());
    Ok(ItoReport { lhs: step(lhs)?, rhs: step(rhs)?, residual_sup, components })
}

/// Cumulative `ΣS_k` and `ΣT_k` with
/// `S_k = F_{t_k}(ω^π_{∧t_k}) - F_{t_k}(ω^π_{∧t_{k-1}})` (space increment) and
/// `T_k = F_{t_k}(ω^π_{∧t_{k-1}}) - F_{t_{k-1}}(ω^π_{∧t_{k-1}})` (time decay).
#[derive(Debug, Clone, PartialEq)]
pub struct StDecomposition {
    pub times: Vec<f64>,
    pub space: Vec<f64>,
    pub time: Vec<f64>,
    /// `F_{t_N}(ω^π) - F_0(ω^π)`.
    pub total: f64,
}

impl StDecomposition {
    /// `|ΣS + ΣT - total|` at the last partition point.
    pub fn telescoping_error(&self) -> f64 {
        let n = self.times.len() - 1;
        (self.space[n] + self.time[n] - self.total).abs()
    }
}

pub fn st_decomposition(
    f: &CausalFunctional,
    path: &CadlagPath,
    partition: &Partition,
) -> Result<StDecomposition> {
    let approx = path.piecewise_const(partition)?;
    let times = partition_times(path, partition);
    let a = f.trajectory(&approx, &times)?;
    let m = f.frozen_trajectory(&approx, &times)?;
    let n = times.len();
    let (mut space, mut time) = (vec![0.0; n], vec![0.0; n]);
    for k in 1..n {
        space[k] = space[k - 1] + (a[k] - m[k]);
        time[k] = time[k - 1] + (m[k] - a[k - 1]);
    }
    Ok(StDecomposition { times, space, time, total: a[n - 1] - a[0] })
}

/// Linear-interpolation quantile of unsorted samples, `q ∈ [0, 1]`.
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    if s.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Per-level ensemble statistics of a sup-distance.
///
/// `center` and `upper` are the quantiles `quantiles.0` and `quantiles.1` of
/// each level's samples, by default the median and the 90th percentile.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<u32>,
    /// `samples[l][p]`: the statistic for path `p` at `levels[l]`.
    pub samples: Vec<Vec<f64>>,
    pub quantiles: (f64, f64),
    pub center: Vec<f64>,
    pub upper: Vec<f64>,
    /// `center` strictly decreasing across levels.
    pub decreasing: bool,
    pub threshold: f64,
    /// Final `center` at most `threshold`.
    pub below_threshold: bool,
}

impl ConvergenceReport {
    pub const DEFAULT_QUANTILES: (f64, f64) = (0.5, 0.9);

    pub fn from_samples(levels: Vec<u32>, samples: Vec<Vec<f64>>, threshold: f64) -> Self {
        Self::with_quantiles(levels, samples, threshold, Self::DEFAULT_QUANTILES)
    }

    pub fn with_quantiles(
        levels: Vec<u32>,
        samples: Vec<Vec<f64>>,
        threshold: f64,
        quantiles: (f64, f64),
    ) -> Self {
        let center: Vec<f64> = samples.iter().map(|s| quantile(s, quantiles.0)).collect();
        let upper = samples.iter().map(|s| quantile(s, quantiles.1)).collect();
        let decreasing = center.windows(2).all(|w| w[1] < w[0]);
        let below_threshold = center.last().is_some_and(|&m| m <= threshold);
        Self { levels, samples, quantiles, center, upper, decreasing, threshold, below_threshold }
    }

    /// The same samples summarized by other quantiles.
    pub fn requantiled(self, quantiles: (f64, f64)) -> Self {
        Self::with_quantiles(self.levels, self.samples, self.threshold, quantiles)
    }

    /// Any quantile of the samples at level index `l`.
    pub fn quantile(&self, l: usize, q: f64) -> f64 {
        quantile(&self.samples[l], q)
    }

    pub fn verdict(&self) -> bool {
        self.decreasing && self.below_threshold
    }

    /// Slope of log-`center` against log-mesh for dyadic levels on `[0, horizon]`.
    pub fn observed_order(&self, horizon: f64) -> f64 {
        let mesh: Vec<f64> = self.levels.iter().map(|&n| horizon * 0.5f64.powi(n as i32)).collect();
        log_log_slope(&mesh, &self.center)
    }

    /// CSV with header `level,median_sup,q90_sup` (column names follow the quantiles).
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let name = |q: f64| match q {
            0.5 => "median_sup".to_string(),
            q => format!("q{}_sup", (q * 100.0).round()),
        };
        writeln!(out, "level,{},{}", name(self.quantiles.0), name(self.quantiles.1))?;
        for (k, n) in self.levels.iter().enumerate() {
            writeln!(out, "{n},{},{}", self.center[k], self.upper[k])?;
        }
        Ok(())
    }
}

fn check_levels(levels: &[u32], finest: u32) -> Result<()> {
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("levels must be non-empty and increasing".into()));
    }
    if levels[levels.len() - 1] > finest {
        return Err(Error::InvalidArgument(format!(
            "level {} is finer than the generator grid level {finest}",
            levels[levels.len() - 1]
        )));
    }
    Ok(())
}

/// Runs `stat(path, level)` over an ensemble in parallel; rows are per level,
/// columns in path-index order.
fn ensemble_stats(
    spec: &GeneratorSpec,
    levels: &[u32],
    ensemble_size: usize,
    stat: impl Fn(&CadlagPath, u32) -> Result<f64> + Sync,
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let per_path: Vec<Vec<f64>> = (0..ensemble_size as u64)
        .into_par_iter()
        .map(|p| {
            let path = generate(spec, p)?;
            levels.iter().map(|&n| stat(&path, n)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..levels.len()).map(|l| per_path.iter().map(|row| row[l]).collect()).collect())
}

/// `sup_{t ≤ T} |F(t, ω^{π(n)}) - F(t, ω)|` across an ensemble, for each
/// dyadic level `n`. Both trajectories are sampled on the generator grid.
pub fn regularity_report(
    f: &CausalFunctional,
    spec: &GeneratorSpec,
    levels: &[u32],
    ensemble_size: usize,
    threshold: f64,
) -> Result<ConvergenceReport> {
    require_causal(f, spec.dim, spec.horizon)?;
    check_levels(levels, spec.level)?;
    let samples = ensemble_stats(spec, levels, ensemble_size, |path, n| {
        let times = path.times();
        let exact = f.trajectory(path, times)?;
        let approx = path.piecewise_const(&Partition::dyadic(spec.horizon, n)?)?;
        let coarse = f.trajectory(&approx, times)?;
        Ok(exact.iter().zip(&coarse).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    })?;
    Ok(ConvergenceReport::from_samples(levels.to_vec(), samples, threshold))
}

/// Itô residual `sup |lhs - rhs|` on `dyadic(T, n)` across an ensemble of
/// paths generated on the finer grid of `spec`.
pub fn ito_refinement(
    f: &CausalFunctional,
    spec: &GeneratorSpec,
    levels: &[u32],
    ensemble_size: usize,
    cfg: &BkConfig,
    threshold: f64,
) -> Result<ConvergenceReport> {
    require_causal(f, spec.dim, spec.horizon)?;
    check_levels(levels, spec.level)?;
    let samples = ensemble_stats(spec, levels, ensemble_size, |path, n| {
        Ok(ito_residual(f, path, &Partition::dyadic(spec.horizon, n)?, cfg)?.residual_sup)
    })?;
    Ok(ConvergenceReport::from_samples(levels.to_vec(), samples, threshold))
}

/// `∂₀F + ½ tr(ΔF σ²)` at `(t, ω)`.
pub fn heat_operator(
    f: &CausalFunctional,
    path: &CadlagPath,
    t: f64,
    sigma2: &DMatrix<f64>,
) -> Result<f64> {
    let b = f.require_bundle(t, path)?;
    if sigma2.nrows() != b.dim() || sigma2.ncols() != b.dim() {
        return Err(Error::DimensionMismatch { expected: b.dim(), got: sigma2.nrows() });
    }
    Ok(b.d0 + 0.5 * (&b.hess * sigma2).trace())
}
