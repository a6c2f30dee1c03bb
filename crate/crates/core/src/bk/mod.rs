//! The Bichteler–Karandikar pathwise Itô integral.
//!
//! At level `n` the integrand `z` is sampled at the stopping times
//! `τ_0 = 0`, `τ_i = first knot after τ_{i-1} with |z - z(τ_{i-1})| ≥ 2^{-n}`,
//! and the integral is the adapted Riemann sum
//! `Iⁿ(t) = z(0)x(0) + Σ_i z(τ_i)(x(τ_{i+1} ∧ t) - x(τ_i ∧ t))`.
//! [`bk_integral`] runs the levels `0..=max_level` and reports the
//! sup-distance between the last two as its Cauchy gap.

mod functionals;

use crate::error::{Error, Result};
use crate::path::{CadlagPath, Partition};

pub use functionals::{doleans_dade, ito_process_functional, levy_area, make_bk_functional, make_qv_functional};

#[derive(Debug, Clone, PartialEq)]
pub struct BkConfig {
    /// Finest level `n_max`; levels `0..=max_level` are computed.
    pub max_level: u32,
    /// Convergence threshold on the sup-distance between consecutive levels.
    pub cauchy_tol: f64,
    /// Integrate on `[0, horizon]` instead of the whole path.
    pub horizon: Option<f64>,
    /// On non-convergence return the zero path instead of the last level.
    pub strict: bool,
    /// Stop at the first level whose Cauchy gap is within tolerance.
    pub early_stop: bool,
}

impl Default for BkConfig {
    fn default() -> Self {
        Self { max_level: 14, cauchy_tol: 1e-3, horizon: None, strict: false, early_stop: false }
    }
}

impl BkConfig {
    pub fn with_max_level(mut self, max_level: u32) -> Self {
        self.max_level = max_level;
        self
    }

    pub fn with_tol(mut self, cauchy_tol: f64) -> Self {
        self.cauchy_tol = cauchy_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_level < 1 || self.max_level > 52 {
            return Err(Error::InvalidArgument(format!(
                "max_level must lie in 1..=52, got {}",
                self.max_level
            )));
        }
        if !(self.cauchy_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cauchy_tol must be positive, got {}",
                self.cauchy_tol
            )));
        }
        Ok(())
    }
}

/// `2^{-n}`, exact.
pub fn threshold(level: u32) -> f64 {
    0.5f64.powi(level as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingGrid {
    pub level: u32,
    /// `τ_0 = 0 < τ_1 < ...`; the sequence ends where the threshold is never met again.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BkResult {
    pub path: CadlagPath,
    pub converged: bool,
    /// The level whose sum is returned.
    pub levels_used: u32,
    pub final_cauchy_gap: f64,
    /// `sup |Iⁿ - Iⁿ⁻¹|` for `n = 1..=levels_used`.
    pub gaps: Vec<f64>,
}

fn scalar(path: &CadlagPath) -> Result<()> {
    if path.dim() == 1 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: 1, got: path.dim() })
    }
}

/// Stopping times of `z` at `level`, scanning the knots of `z` in `[0, horizon]`.
pub fn stopping_times(z: &CadlagPath, level: u32, horizon: f64) -> Result<StoppingGrid> {
    scalar(z)?;
    z.check_time(horizon)?;
    let thr = threshold(level);
    let vals = z.values();
    let mut times = vec![0.0];
    let mut anchor = vals[0];
    for (k, &t) in z.times().iter().enumerate().skip(1) {
        if t > horizon {
            break;
        }
        if (vals[k] - anchor).abs() >= thr {
            times.push(t);
            anchor = vals[k];
        }
    }
    Ok(StoppingGrid { level, times })
}

/// The level sum on aligned samples. `is_tau(k, z_τ)` decides whether knot
/// `k ≥ 1` is the next stopping time given the current anchor `z_τ`.
///
/// With `base = acc - z_τ x(τ)` the sum reads `I(t) = base + z_τ x(t)` on
/// `[τ, next τ)`, so a constant integrand gives exactly `c·x(t)`.
pub(crate) fn accumulate(
    z: &[f64],
    x: &[f64],
    mut is_tau: impl FnMut(usize, f64) -> bool,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut z_tau = z[0];
    let mut base = z[0] * x[0] - z_tau * x[0];
    out.push(base + z_tau * x[0]);
    for k in 1..x.len() {
        if is_tau(k, z_tau) {
            let acc = base + z_tau * x[k];
            z_tau = z[k];
            base = acc - z_tau * x[k];
        }
        out.push(base + z_tau * x[k]);
    }
    out
}

/// Level sum for samples on a common grid.
pub(crate) fn level_sum_aligned(z: &[f64], x: &[f64], level: u32) -> Vec<f64> {
    let thr = threshold(level);
    accumulate(z, x, |k, z_tau| (z[k] - z_tau).abs() >= thr)
}

/// Merges sorted time lists, keeping times `≤ until`, without duplicates.
fn merge_times(lists: &[&[f64]], until: f64) -> Vec<f64> {
    let mut all: Vec<f64> =
        lists.iter().flat_map(|l| l.iter().copied()).filter(|&t| t <= until).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

/// Samples scalar `path` at sorted `times`.
fn sample(path: &CadlagPath, times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let knots = path.times();
    let mut k = 0;
    for &t in times {
        while k + 1 < knots.len() && knots[k + 1] <= t {
            k += 1;
        }
        out.push(path.values()[k]);
    }
    out
}

fn common_horizon(z: &CadlagPath, x: &CadlagPath, horizon: Option<f64>) -> Result<f64> {
    match horizon {
        Some(h) => {
            z.check_time(h)?;
            x.check_time(h)?;
            Ok(h)
        }
        None if z.horizon() == x.horizon() => Ok(z.horizon()),
        None => Err(Error::InvalidArgument(format!(
            "integrand horizon {} differs from integrator horizon {}",
            z.horizon(),
            x.horizon()
        ))),
    }
}

struct Aligned {
    grid: Partition,
    z: Vec<f64>,
    x: Vec<f64>,
    horizon: f64,
}

impl Aligned {
    fn new(z: &CadlagPath, x: &CadlagPath, extra: &[f64], horizon: f64) -> Result<Self> {
        let times = merge_times(&[z.times(), x.times(), extra], horizon);
        Ok(Self {
            z: sample(z, &times),
            x: sample(x, &times),
            grid: Partition::new(times)?,
            horizon,
        })
    }

    fn path(&self, values: Vec<f64>) -> Result<CadlagPath> {
        CadlagPath::scalar(self.grid.clone(), values)?.with_horizon(self.horizon)
    }
}

/// `Iⁿ(z, x)` as a step path on the union of both grids.
pub fn level_sum(z: &CadlagPath, x: &CadlagPath, level: u32) -> Result<CadlagPath> {
    scalar(z)?;
    scalar(x)?;
    let horizon = common_horizon(z, x, None)?;
    let a = Aligned::new(z, x, &[], horizon)?;
    a.path(level_sum_aligned(&a.z, &a.x, level))
}

/// The level sum along a given stopping grid. Linear in `z` and in `x`
/// for a fixed grid.
pub fn level_sum_on(grid: &StoppingGrid, z: &CadlagPath, x: &CadlagPath) -> Result<CadlagPath> {
    scalar(z)?;
    scalar(x)?;
    let horizon = common_horizon(z, x, None)?;
    let a = Aligned::new(z, x, &grid.times, horizon)?;
    let times = a.grid.times();
    let mut next = 1;
    let values = accumulate(&a.z, &a.x, |k, _| {
        let hit = grid.times.get(next) == Some(&times[k]);
        if hit {
            next += 1;
        }
        hit
    });
    a.path(values)
}

fn run_levels(
    cfg: &BkConfig,
    mut level_values: impl FnMut(u32) -> Vec<f64>,
    to_path: impl Fn(Vec<f64>) -> Result<CadlagPath>,
) -> Result<BkResult> {
    cfg.validate()?;
    let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let mut current = level_values(0);
    let mut gaps = Vec::new();
    let mut level = 0;
    while level < cfg.max_level {
        level += 1;
        let next = level_values(level);
        let gap = sup(&current, &next);
        gaps.push(gap);
        current = next;
        if cfg.early_stop && gap <= cfg.cauchy_tol {
            break;
        }
    }
    let final_cauchy_gap = *gaps.last().expect("at least one refinement");
    let converged = final_cauchy_gap <= cfg.cauchy_tol;
    if cfg.strict && !converged {
        current.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(BkResult { path: to_path(current)?, converged, levels_used: level, final_cauchy_gap, gaps })
}

/// `∫ z₋ dxⁱ` by the level sums at `0..=cfg.max_level`.
///
/// Without convergence the last level is returned with `converged = false`,
/// or the zero path when `cfg.strict` is set.
pub fn bk_integral(z: &CadlagPath, x: &CadlagPath, i: usize, cfg: &BkConfig) -> Result<BkResult> {
    scalar(z)?;
    let xi = x.coordinate(i)?;
    let horizon = common_horizon(z, &xi, cfg.horizon)?;
    let a = Aligned::new(z, &xi, &[], horizon)?;
    run_levels(cfg, |n| level_sum_aligned(&a.z, &a.x, n), |v| a.path(v))
}

fn finite_lifetime(path: &CadlagPath) -> Result<()> {
    match path.lifetime() {
        Some(_) => Err(Error::FiniteLifetime),
        None => Ok(()),
    }
}

/// `B^{ij}` at one level on aligned coordinate samples.
pub(crate) fn qv_aligned(xi: &[f64], xj: &[f64], level: u32) -> Vec<f64> {
    let a = level_sum_aligned(xi, xj, level);
    let b = level_sum_aligned(xj, xi, level);
    xi.iter().zip(xj).zip(a.iter().zip(&b)).map(|((p, q), (a, b))| p * q - (a + b)).collect()
}

fn coordinate_values(path: &CadlagPath, i: usize, horizon: f64) -> Vec<f64> {
    let keep = path.grid().count_le(horizon);
    path.values().iter().skip(i).step_by(path.dim()).take(keep).copied().collect()
}

/// `B^{ij} = XⁱXʲ - ∫Xⁱ dXʲ - ∫Xʲ dXⁱ` with both integrals taken at the same level.
pub fn quad_variation(path: &CadlagPath, i: usize, j: usize, cfg: &BkConfig) -> Result<BkResult> {
    finite_lifetime(path)?;
    path.check_coordinate(i)?;
    path.check_coordinate(j)?;
    let horizon = cfg.horizon.unwrap_or(path.horizon());
    path.check_time(horizon)?;
    let xi = coordinate_values(path, i, horizon);
    let xj = coordinate_values(path, j, horizon);
    let grid = path.truncated(horizon);
    run_levels(cfg, |n| qv_aligned(&xi, &xj, n), |v| {
        CadlagPath::scalar(grid.grid().clone(), v)?.with_horizon(horizon)
    })
}

/// `B^{ij}` at a single level `n`.
pub fn qv_level(path: &CadlagPath, i: usize, j: usize, level: u32) -> Result<CadlagPath> {
    finite_lifetime(path)?;
    path.check_coordinate(i)?;
    path.check_coordinate(j)?;
    let h = path.horizon();
    let v = qv_aligned(&coordinate_values(path, i, h), &coordinate_values(path, j, h), level);
    CadlagPath::scalar(path.grid().clone(), v)?.with_horizon(h)
}
