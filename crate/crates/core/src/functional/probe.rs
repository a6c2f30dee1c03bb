//! Sampled evidence for causality and causal continuity. A probe can refute
//! a property but never prove it: every report is an under-approximation
//! over the perturbations it happened to draw.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CausalFunctional;
use crate::error::{Error, Result};
use crate::path::{CadlagPath, Partition};

/// `true` iff `F(t, ω) == F(t, ω_{∧t})` exactly at every probe time.
pub fn check_causality(f: &CausalFunctional, path: &CadlagPath, times: &[f64]) -> Result<bool> {
    for &t in times {
        if f.eval(t, path)? != f.eval(t, &path.stop(t)?)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A deterministic non-constant test path with jumps, used to screen
/// user-supplied functionals for causality.
pub fn probe_path(dim: usize, horizon: f64) -> Result<CadlagPath> {
    let grid = Partition::dyadic(horizon, 8)?;
    let mut values = Vec::with_capacity(grid.len() * dim);
    for &t in grid.times() {
        let s = t / horizon;
        for i in 0..dim {
            let f = (i + 1) as f64;
            let jump = if s >= 1.0 / 3.0 { 0.5 * f } else { 0.0 };
            values.push((6.0 * f * s).sin() + 0.3 * (17.0 * s + f).cos() + jump);
        }
    }
    CadlagPath::new(grid, values, dim)
}

/// Errors with [`Error::NonCausal`] if `f` fails the causality check on the
/// probe path of the given dimension.
pub fn require_causal(f: &CausalFunctional, dim: usize, horizon: f64) -> Result<()> {
    let path = probe_path(dim.max(f.min_dim()), horizon)?;
    let times: Vec<f64> = path.times().iter().step_by(7).copied().collect();
    if check_causality(f, &path, &times)? {
        Ok(())
    } else {
        Err(Error::NonCausal(f.label()))
    }
}

#[derive(Debug, Clone)]
pub struct ProbeOptions {
    /// Perturbation pairs drawn per size.
    pub samples: usize,
    /// Probe times `r ≤ t` per size.
    pub probe_times: usize,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { samples: 16, probe_times: 32, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityProbeReport {
    pub radius: f64,
    pub horizon: f64,
    /// Perturbation sizes in increasing order.
    pub sizes: Vec<f64>,
    pub sup_response: Vec<f64>,
    /// Running maximum of `sup_response`: a non-decreasing modulus estimate.
    pub modulus: Vec<f64>,
    /// Heuristic verdict that the modulus decays to 0: at the smallest
    /// positive size it is at most the largest-size value scaled by the
    /// square root of the size ratio.
    pub vanishing: bool,
}

impl ContinuityProbeReport {
    fn build(radius: f64, horizon: f64, mut rows: Vec<(f64, f64)>) -> Self {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let sizes: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let sup_response: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let mut modulus = Vec::with_capacity(rows.len());
        let mut run = 0.0f64;
        for &r in &sup_response {
            run = run.max(r);
            modulus.push(run);
        }
        let positive: Vec<usize> = (0..sizes.len()).filter(|&k| sizes[k] > 0.0).collect();
        let vanishing = match (positive.first(), positive.last()) {
            (Some(&lo), Some(&hi)) if lo != hi => {
                modulus[lo] <= modulus[hi] * (sizes[lo] / sizes[hi]).sqrt() + 1e-12
            }
            (Some(&lo), _) => modulus[lo] <= 1e-12,
            _ => true,
        };
        Self { radius, horizon, sizes, sup_response, modulus, vanishing }
    }

    /// CSV with header `size,sup_response`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "size,sup_response")?;
        for (s, r) in self.sizes.iter().zip(&self.sup_response) {
            writeln!(out, "{s},{r}")?;
        }
        Ok(())
    }
}

fn probe_times(t: f64, count: usize) -> Vec<f64> {
    let m = count.max(1);
    let mut times: Vec<f64> = (0..m).map(|j| t * (j as f64 + 0.5) / m as f64).collect();
    times.push(t);
    times
}

fn check_sizes(sizes: &[f64]) -> Result<()> {
    match sizes.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        Some(s) => Err(Error::InvalidArgument(format!("perturbation size {s} must be non-negative"))),
        None => Ok(()),
    }
}

/// Samples `sup_{r ≤ t} |F_r(ω^{r,Δ}) - F_r(ω^{r,Δ̃})|` over constant-in-time
/// bump pairs with `|Δ - Δ̃|_∞` equal to each requested size and `|Δ|_∞ ≤ R`.
/// The first pair per size is `(size·1, 0)`.
pub fn probe_space_continuity(
    f: &CausalFunctional,
    path: &CadlagPath,
    t: f64,
    radius: f64,
    sizes: &[f64],
    opts: &ProbeOptions,
) -> Result<ContinuityProbeReport> {
    path.check_time(t)?;
    check_sizes(sizes)?;
    let d = path.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let times = probe_times(t, opts.probe_times);
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut sup = 0.0f64;
        for sample in 0..opts.samples.max(1) {
            let (delta, other): (Vec<f64>, Vec<f64>) = if sample == 0 {
                (vec![size; d], vec![0.0; d])
            } else {
                let delta: Vec<f64> = (0..d).map(|_| rng.random_range(-radius..=radius)).collect();
                let other = delta
                    .iter()
                    .map(|x| if rng.random_bool(0.5) { x + size } else { x - size })
                    .collect();
                (delta, other)
            };
            for &r in &times {
                let a = f.eval(r, &path.bump(r, &delta)?)?;
                let b = f.eval(r, &path.bump(r, &other)?)?;
                sup = sup.max((a - b).abs());
            }
        }
        rows.push((size, sup));
    }
    Ok(ContinuityProbeReport::build(radius, t, rows))
}

/// Samples `sup_{r ≤ t} |F_{r+s}(ω_{∧r}) - F_r(ω)|` for each shift `s`,
/// skipping probe times with `r + s` past the horizon.
pub fn probe_time_continuity(
    f: &CausalFunctional,
    path: &CadlagPath,
    t: f64,
    radius: f64,
    sizes: &[f64],
    opts: &ProbeOptions,
) -> Result<ContinuityProbeReport> {
    path.check_time(t)?;
    check_sizes(sizes)?;
    let times = probe_times(t, opts.probe_times);
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut sup = 0.0f64;
        for &r in times.iter().filter(|&&r| r + size <= path.horizon()) {
            let shifted = f.eval(r + size, &path.stop(r)?)?;
            sup = sup.max((shifted - f.eval(r, path)?).abs());
        }
        rows.push((size, sup));
    }
    Ok(ContinuityProbeReport::build(radius, t, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{constant, jump_indicator, running_integral, state_1d, terminal_value, time};

    const SIZES: [f64; 5] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1];

    fn wiggle() -> CadlagPath {
        CadlagPath::scalar_from_fn(Partition::dyadic(1.0, 7).unwrap(), |t| (9.0 * t).sin())
    }

    #[test]
    fn causality_examples() {
        let path = probe_path(1, 1.0).unwrap();
        let times: Vec<f64> = path.times().to_vec();
        let sq = state_1d(|t, x| t * x * x, |_, x| x * x, |t, x| 2.0 * t * x, |t, _| 2.0 * t);
        assert!(check_causality(&sq, &path, &times).unwrap());
        assert!(check_causality(&running_integral(|_, x| x[0].sin()), &path, &times).unwrap());
        assert!(!check_causality(&terminal_value(0), &path, &[0.5]).unwrap());
        assert!(check_causality(&terminal_value(0), &path, &[1.0]).unwrap());
        assert!(matches!(require_causal(&terminal_value(0), 1, 1.0), Err(Error::NonCausal(_))));
    }

    #[test]
    fn lipschitz_state_functional_is_space_continuous() {
        let f = state_1d(|_, x| 3.0 * x.sin(), |_, _| 0.0, |_, x| 3.0 * x.cos(), |_, x| -3.0 * x.sin());
        let rep = probe_space_continuity(&f, &wiggle(), 0.8, 1.0, &SIZES, &ProbeOptions::default())
            .unwrap();
        assert_eq!(rep.sup_response[0], 0.0);
        for (s, r) in rep.sizes.iter().zip(&rep.sup_response) {
            assert!(*r <= 3.0 * s + 1e-12);
        }
        assert!(rep.vanishing);
    }

    #[test]
    fn jump_indicator_is_flagged() {
        let flat = CadlagPath::constant(vec![0.0], 1.0).unwrap();
        let rep = probe_space_continuity(&jump_indicator(), &flat, 0.8, 1.0, &SIZES, &ProbeOptions::default())
            .unwrap();
        assert_eq!(rep.sup_response[1], 1.0);
        assert!(!rep.vanishing);
    }

    #[test]
    fn time_probe_examples() {
        let opts = ProbeOptions::default();
        let rep = probe_time_continuity(&time(), &wiggle(), 0.5, 1.0, &SIZES, &opts).unwrap();
        for (s, r) in rep.sizes.iter().zip(&rep.sup_response) {
            assert!((r - s).abs() < 1e-15);
        }
        let integral = running_integral(|_, x| x[0].cos());
        let rep = probe_time_continuity(&integral, &wiggle(), 0.5, 1.0, &SIZES, &opts).unwrap();
        for (s, r) in rep.sizes.iter().zip(&rep.sup_response) {
            assert!(*r <= s + 1e-15);
        }
        let rep = probe_time_continuity(&constant(2.0), &wiggle(), 0.5, 1.0, &SIZES, &opts).unwrap();
        assert!(rep.sup_response.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn modulus_is_monotone_and_csv_has_header() {
        let rep = ContinuityProbeReport::build(1.0, 1.0, vec![(0.1, 0.5), (0.01, 0.7), (0.2, 0.6)]);
        assert_eq!(rep.sizes, vec![0.01, 0.1, 0.2]);
        assert_eq!(rep.modulus, vec![0.7, 0.7, 0.7]);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("size,sup_response\n0.01,0.7\n"));
    }

    #[test]
    fn negative_sizes_are_rejected() {
        let f = time();
        assert!(probe_time_continuity(&f, &wiggle(), 0.5, 1.0, &[-0.1], &ProbeOptions::default()).is_err());
    }
}
