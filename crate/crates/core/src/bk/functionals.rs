//! Functionals built from BK integrals, evaluated at the fixed level
//! `cfg.max_level`. A fixed level keeps them exactly causal: choosing the
//! level from a convergence test would let the future of the path leak in.

use nalgebra::{DMatrix, DVector};

use super::{coordinate_values, level_sum_aligned, qv_aligned, BkConfig};
use crate::error::{Error, Result};
use crate::functional::{require_causal, CausalFunctional, DerivativeBundle, Functional};
use crate::path::CadlagPath;

/// A functional that is constant between the knots of its argument: its
/// value at `t` is the value at the last knot `≤ t`.
trait KnotValued: Send + Sync {
    fn knot_values(&self, path: &CadlagPath) -> Vec<f64>;
}

fn at_knot(path: &CadlagPath, values: &[f64], t: f64) -> f64 {
    values[path.index_at(t)]
}

fn step_value(f: &impl KnotValued, t: f64, path: &CadlagPath) -> f64 {
    let stopped = path.stopped(t);
    *f.knot_values(&stopped).last().expect("paths have a knot at 0")
}

fn step_trajectory(f: &impl KnotValued, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
    let values = f.knot_values(path);
    times.iter().map(|&t| at_knot(path, &values, t)).collect()
}

/// On `ω_{∧t_{k-1}}` a step functional is frozen at its value at `t_{k-1}`.
fn step_frozen(f: &impl KnotValued, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
    let values = f.knot_values(path);
    let mut out: Vec<f64> = times.first().map(|&t| at_knot(path, &values, t)).into_iter().collect();
    out.extend(times.windows(2).map(|w| at_knot(path, &values, w[0])));
    out
}

/// Index of the knot holding `X_{t-}`, or `None` at the pre-start.
fn left_index(path: &CadlagPath, t: f64) -> Option<usize> {
    path.grid().count_lt(t).checked_sub(1)
}

/// Index of the knot holding `X_{t_k-}(ω_{∧t_{k-1}})`.
fn predictable_index(path: &CadlagPath, prev: f64, t: f64) -> Option<usize> {
    path.grid().count_le(prev).min(path.grid().count_lt(t)).checked_sub(1)
}

/// `Δ_t X^i`, zero off the knots and at `t = 0`.
fn jump_at(path: &CadlagPath, t: f64, i: usize) -> f64 {
    let k = path.index_at(t);
    if k == 0 || path.times()[k] != t {
        0.0
    } else {
        path.knot(k)[i] - path.knot(k - 1)[i]
    }
}

fn unit(dim: usize, i: usize, v: f64) -> DVector<f64> {
    let mut g = DVector::zeros(dim);
    g[i] = v;
    g
}

struct BkFunctional {
    z: CausalFunctional,
    i: usize,
    level: u32,
}

impl BkFunctional {
    fn z_values(&self, path: &CadlagPath) -> Vec<f64> {
        self.z.inner().trajectory(path, path.times())
    }

    fn bundle_from(&self, dim: usize, z_left: Option<f64>) -> DerivativeBundle {
        DerivativeBundle::new(0.0, unit(dim, self.i, z_left.unwrap_or(0.0)), DMatrix::zeros(dim, dim))
    }
}

impl KnotValued for BkFunctional {
    fn knot_values(&self, path: &CadlagPath) -> Vec<f64> {
        let x = coordinate_values(path, self.i, path.horizon());
        level_sum_aligned(&self.z_values(path), &x, self.level)
    }
}

impl Functional for BkFunctional {
    fn label(&self) -> String {
        format!("bk_integral({}, x{})", self.z.label(), self.i + 1)
    }

    fn value(&self, t: f64, path: &CadlagPath) -> f64 {
        step_value(self, t, path)
    }

    fn min_dim(&self) -> usize {
        (self.i + 1).max(self.z.min_dim())
    }

    fn has_analytic(&self) -> bool {
        true
    }

    fn analytic(&self, t: f64, path: &CadlagPath) -> Option<DerivativeBundle> {
        let z_left = left_index(path, t).map(|k| self.z.inner().value(path.times()[k], path));
        Some(self.bundle_from(path.dim(), z_left))
    }

    fn trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        step_trajectory(self, path, times)
    }

    fn frozen_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        step_frozen(self, path, times)
    }

    fn analytic_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Option<Vec<DerivativeBundle>> {
        let z = self.z_values(path);
        Some(times.iter().map(|&t| self.bundle_from(path.dim(), left_index(path, t).map(|k| z[k]))).collect())
    }

    fn predictable_bundles(&self, path: &CadlagPath, times: &[f64]) -> Option<Vec<DerivativeBundle>> {
        let z = self.z_values(path);
        Some(
            times
                .windows(2)
                .map(|w| self.bundle_from(path.dim(), predictable_index(path, w[0], w[1]).map(|k| z[k])))
                .collect(),
        )
    }
}

/// `J_Z(t, ω) = I(Z(ω), Xⁱ(ω))_t` where the integrand path `Z(ω)` is `Z`
/// evaluated at the knots of `ω`. Analytic bundle `(0, Z_{t-} eᵢ, 0)`.
/// `Z` is screened for causality on a probe path.
pub fn make_bk_functional(z: CausalFunctional, i: usize, cfg: &BkConfig) -> Result<CausalFunctional> {
    cfg.validate()?;
    require_causal(&z, i + 1, 1.0)?;
    Ok(CausalFunctional::new(BkFunctional { z, i, level: cfg.max_level }))
}

struct QvFunctional {
    i: usize,
    j: usize,
    level: u32,
}

impl QvFunctional {
    fn bundle(&self, dim: usize, jump_i: f64, jump_j: f64) -> DerivativeBundle {
        let mut grad = DVector::zeros(dim);
        grad[self.i] += jump_j;
        grad[self.j] += jump_i;
        let mut hess = DMatrix::zeros(dim, dim);
        hess[(self.i, self.j)] += 1.0;
        hess[(self.j, self.i)] += 1.0;
        DerivativeBundle::new(0.0, grad, hess)
    }
}

impl KnotValued for QvFunctional {
    fn knot_values(&self, path: &CadlagPath) -> Vec<f64> {
        if path.lifetime().is_some() {
            return vec![0.0; path.knot_count()];
        }
        let h = path.horizon();
        qv_aligned(&coordinate_values(path, self.i, h), &coordinate_values(path, self.j, h), self.level)
    }
}

impl Functional for QvFunctional {
    fn label(&self) -> String {
        format!("qv(x{}, x{})", self.i + 1, self.j + 1)
    }

    fn value(&self, t: f64, path: &CadlagPath) -> f64 {
        step_value(self, t, path)
    }

    fn min_dim(&self) -> usize {
        self.i.max(self.j) + 1
    }

    fn has_analytic(&self) -> bool {
        true
    }

    fn analytic(&self, t: f64, path: &CadlagPath) -> Option<DerivativeBundle> {
        if path.lifetime().is_some() {
            return Some(DerivativeBundle::zero(path.dim()));
        }
        Some(self.bundle(path.dim(), jump_at(path, t, self.i), jump_at(path, t, self.j)))
    }

    fn trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        step_trajectory(self, path, times)
    }

    fn frozen_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        step_frozen(self, path, times)
    }

    fn predictable_bundles(&self, path: &CadlagPath, times: &[f64]) -> Option<Vec<DerivativeBundle>> {
        let b = if path.lifetime().is_some() {
            DerivativeBundle::zero(path.dim())
        } else {
            self.bundle(path.dim(), 0.0, 0.0)
        };
        Some(vec![b; times.len().saturating_sub(1)])
    }
}

/// `B^{ij}` as a functional, with bundle `(0, Δ_tXʲ eᵢ + Δ_tXⁱ eⱼ, eᵢeⱼᵀ + eⱼeᵢᵀ)`.
/// Paths with a finite lifetime are killed: the value is 0.
pub fn make_qv_functional(i: usize, j: usize, cfg: &BkConfig) -> Result<CausalFunctional> {
    cfg.validate()?;
    Ok(CausalFunctional::new(QvFunctional { i, j, level: cfg.max_level }))
}

struct DoleansDade {
    level: u32,
}

impl KnotValued for DoleansDade {
    fn knot_values(&self, path: &CadlagPath) -> Vec<f64> {
        let x = coordinate_values(path, 0, path.horizon());
        let b = qv_aligned(&x, &x, self.level);
        x.iter().zip(&b).map(|(x, b)| (x - 0.5 * b).exp()).collect()
    }
}

impl DoleansDade {
    fn bundle(dim: usize, e: f64, jump: f64) -> DerivativeBundle {
        let mut hess = DMatrix::zeros(dim, dim);
        hess[(0, 0)] = e * jump * (-2.0 + jump);
        DerivativeBundle::new(0.0, unit(dim, 0, e * (1.0 - jump)), hess)
    }
}

impl Functional for DoleansDade {
    fn label(&self) -> String {
        "doleans_dade".into()
    }

    fn value(&self, t: f64, path: &CadlagPath) -> f64 {
        step_value(self, t, path)
    }

    fn has_analytic(&self) -> bool {
        true
    }

    fn analytic(&self, t: f64, path: &CadlagPath) -> Option<DerivativeBundle> {
        Some(Self::bundle(path.dim(), self.value(t, path), jump_at(path, t, 0)))
    }

    fn trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        step_trajectory(self, path, times)
    }

    fn frozen_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        step_frozen(self, path, times)
    }

    fn analytic_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Option<Vec<DerivativeBundle>> {
        let e = step_trajectory(self, path, times);
        Some(times.iter().zip(e).map(|(&t, e)| Self::bundle(path.dim(), e, jump_at(path, t, 0))).collect())
    }

    fn predictable_bundles(&self, path: &CadlagPath, times: &[f64]) -> Option<Vec<DerivativeBundle>> {
        let frozen = step_frozen(self, path, times);
        Some(frozen.into_iter().skip(1).map(|e| Self::bundle(path.dim(), e, 0.0)).collect())
    }
}

/// `E_t = exp(X_t - ½ B_t)` on the first coordinate, with bundle
/// `(0, E(1 - ΔX), E ΔX (ΔX - 2))`.
pub fn doleans_dade(cfg: &BkConfig) -> Result<CausalFunctional> {
    cfg.validate()?;
    Ok(CausalFunctional::new(DoleansDade { level: cfg.max_level }))
}

struct LevyArea {
    level: u32,
}

impl KnotValued for LevyArea {
    fn knot_values(&self, path: &CadlagPath) -> Vec<f64> {
        let h = path.horizon();
        let (x1, x2) = (coordinate_values(path, 0, h), coordinate_values(path, 1, h));
        let a = level_sum_aligned(&x1, &x2, self.level);
        let b = level_sum_aligned(&x2, &x1, self.level);
        a.iter().zip(&b).map(|(a, b)| a - b).collect()
    }
}

impl LevyArea {
    fn bundle(path: &CadlagPath, knot: Option<usize>) -> DerivativeBundle {
        let d = path.dim();
        let mut grad = DVector::zeros(d);
        if let Some(k) = knot {
            let x = path.knot(k);
            grad[0] = -x[1];
            grad[1] = x[0];
        }
        DerivativeBundle::new(0.0, grad, DMatrix::zeros(d, d))
    }
}

impl Functional for LevyArea {
    fn label(&self) -> String {
        "levy_area".into()
    }

    fn value(&self, t: f64, path: &CadlagPath) -> f64 {
        step_value(self, t, path)
    }

    fn min_dim(&self) -> usize {
        2
    }

    fn has_analytic(&self) -> bool {
        true
    }

    fn analytic(&self, t: f64, path: &CadlagPath) -> Option<DerivativeBundle> {
        Some(Self::bundle(path, left_index(path, t)))
    }

    fn trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        step_trajectory(self, path, times)
    }

    fn frozen_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        step_frozen(self, path, times)
    }

    fn predictable_bundles(&self, path: &CadlagPath, times: &[f64]) -> Option<Vec<DerivativeBundle>> {
        Some(times.windows(2).map(|w| Self::bundle(path, predictable_index(path, w[0], w[1]))).collect())
    }
}

/// `∫X¹ dX² - ∫X² dX¹`, with bundle `(0, (-X²_{t-}, X¹_{t-}), 0)`.
pub fn levy_area(cfg: &BkConfig) -> Result<CausalFunctional> {
    cfg.validate()?;
    Ok(CausalFunctional::new(LevyArea { level: cfg.max_level }))
}

struct ItoProcess {
    mu: CausalFunctional,
    sigma: Vec<CausalFunctional>,
    level: u32,
}

impl ItoProcess {
    /// `Σᵢ ∫_{(0,t]} σⁱ₋ dXⁱ` at the knots: the level sum without its
    /// `σ(0)X(0)` term.
    fn martingale_part(&self, path: &CadlagPath) -> Vec<f64> {
        let h = path.horizon();
        let mut total = vec![0.0; path.knot_count()];
        for (i, s) in self.sigma.iter().enumerate() {
            let z = s.inner().trajectory(path, path.times());
            let x = coordinate_values(path, i, h);
            let start = z[0] * x[0];
            for (acc, v) in total.iter_mut().zip(level_sum_aligned(&z, &x, self.level)) {
                *acc += v - start;
            }
        }
        total
    }

    fn drift_part(&self, path: &CadlagPath, times: &[f64], limits: impl Fn(usize) -> usize) -> Vec<f64> {
        let rates = self.mu.inner().trajectory(path, path.times());
        let prefix = crate::functional::integral_prefix(path.times(), &rates);
        times
            .iter()
            .enumerate()
            .map(|(k, &t)| crate::functional::integral_at(path, &prefix, &rates, t, limits(k)))
            .collect()
    }

    fn bundle(&self, dim: usize, mu: f64, sigma: impl Fn(usize) -> f64) -> DerivativeBundle {
        let grad = DVector::from_iterator(dim, (0..dim).map(|i| if i < self.sigma.len() { sigma(i) } else { 0.0 }));
        DerivativeBundle::new(mu, grad, DMatrix::zeros(dim, dim))
    }
}

impl Functional for ItoProcess {
    fn label(&self) -> String {
        let s: Vec<String> = self.sigma.iter().map(CausalFunctional::label).collect();
        format!("ito_process({}; {})", self.mu.label(), s.join(", "))
    }

    fn value(&self, t: f64, path: &CadlagPath) -> f64 {
        self.trajectory(path, &[t])[0]
    }

    fn min_dim(&self) -> usize {
        self.sigma.iter().map(CausalFunctional::min_dim).chain([self.sigma.len(), self.mu.min_dim()]).max().unwrap_or(1)
    }

    fn has_analytic(&self) -> bool {
        true
    }

    fn analytic(&self, t: f64, path: &CadlagPath) -> Option<DerivativeBundle> {
        let left = left_index(path, t);
        Some(self.bundle(path.dim(), self.mu.inner().value(t, path), |i| {
            left.map_or(0.0, |k| self.sigma[i].inner().value(path.times()[k], path))
        }))
    }

    fn trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        let drift = self.drift_part(path, times, |_| usize::MAX);
        let mart = self.martingale_part(path);
        drift.iter().zip(times).map(|(d, &t)| d + at_knot(path, &mart, t)).collect()
    }

    fn frozen_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        let alive = |k: usize| if k == 0 { usize::MAX } else { path.grid().count_le(times[k - 1]) };
        let drift = self.drift_part(path, times, alive);
        let mart = self.martingale_part(path);
        let mut out = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            let anchor = if k == 0 { t } else { times[k - 1] };
            out.push(drift[k] + at_knot(path, &mart, anchor));
        }
        out
    }

    fn analytic_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Option<Vec<DerivativeBundle>> {
        let mu = self.mu.inner().trajectory(path, times);
        let sig: Vec<Vec<f64>> = self.sigma.iter().map(|s| s.inner().trajectory(path, path.times())).collect();
        Some(
            times
                .iter()
                .zip(mu)
                .map(|(&t, m)| {
                    let left = left_index(path, t);
                    self.bundle(path.dim(), m, |i| left.map_or(0.0, |k| sig[i][k]))
                })
                .collect(),
        )
    }

    fn predictable_bundles(&self, path: &CadlagPath, times: &[f64]) -> Option<Vec<DerivativeBundle>> {
        let mu = self.mu.inner().frozen_trajectory(path, times);
        let sig: Vec<Vec<f64>> = self.sigma.iter().map(|s| s.inner().trajectory(path, path.times())).collect();
        Some(
            times
                .windows(2)
                .zip(mu.into_iter().skip(1))
                .map(|(w, m)| {
                    let k = predictable_index(path, w[0], w[1]);
                    self.bundle(path.dim(), m, |i| k.map_or(0.0, |k| sig[i][k]))
                })
                .collect(),
        )
    }
}

/// `F_t = ∫₀ᵗ μ_r dr + Σᵢ ∫₀ᵗ σⁱ_{r-} dXⁱ_r` with bundle `(μ_t, σ_{t-}, 0)`.
/// The drift integral uses the same quadrature as
/// [`running_integral`](crate::functional::running_integral).
pub fn ito_process_functional(
    mu: CausalFunctional,
    sigma: Vec<CausalFunctional>,
    cfg: &BkConfig,
) -> Result<CausalFunctional> {
    cfg.validate()?;
    if sigma.is_empty() {
        return Err(Error::InvalidArgument("at least one volatility coefficient is required".into()));
    }
    let dim = sigma.len();
    require_causal(&mu, dim, 1.0)?;
    for s in &sigma {
        require_causal(s, dim, 1.0)?;
    }
    Ok(CausalFunctional::new(ItoProcess { mu, sigma, level: cfg.max_level }))
}
