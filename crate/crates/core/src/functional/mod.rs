//! Causal path functionals `F(t, ω)` and their derivative bundles.
//!
//! Implementors provide [`Functional`]; callers go through the checked
//! [`CausalFunctional`] handle, which enforces the time domain, the minimum
//! path dimension and the lifetime convention (value and derivatives vanish
//! for `t ≥ lifetime`).

mod builtin;
mod combine;
mod numeric;
mod probe;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::path::CadlagPath;

pub(crate) use builtin::{integral_at, integral_prefix};
pub use builtin::{
    constant, jump_indicator, running_integral, state, state_1d, terminal_value, time,
};
pub use combine::{combine, linear, Combine, SmoothMap};
pub use numeric::{numeric_bundle, numeric_gradient, numeric_hessian, numeric_time_derivative};
pub use probe::{
    check_causality, probe_path, probe_space_continuity, probe_time_continuity, require_causal,
    ContinuityProbeReport, ProbeOptions,
};

/// `(∂₀F, ∇F, ΔF)` at a point `(t, ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub d0: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl DerivativeBundle {
    pub fn new(d0: f64, grad: DVector<f64>, hess: DMatrix<f64>) -> Self {
        Self { d0, grad, hess }
    }

    pub fn zero(dim: usize) -> Self {
        Self { d0: 0.0, grad: DVector::zeros(dim), hess: DMatrix::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// Largest absolute componentwise difference.
    pub fn max_gap(&self, other: &DerivativeBundle) -> f64 {
        let g = (&self.grad - &other.grad).amax();
        let h = (&self.hess - &other.hess).amax();
        (self.d0 - other.d0).abs().max(g).max(h)
    }
}

/// A causal functional. `value(t, path)` must depend on `path` only through
/// its restriction to `[0, t]`; the trajectory methods may be overridden with
/// faster equivalents of the pointwise defaults but must agree with them.
///
/// Inputs are validated by [`CausalFunctional`] before these methods run:
/// every `t` lies in `[0, path.horizon()]` and `times` is sorted.
pub trait Functional: Send + Sync {
    fn label(&self) -> String;

    fn value(&self, t: f64, path: &CadlagPath) -> f64;

    fn has_analytic(&self) -> bool {
        false
    }

    fn analytic(&self, _t: f64, _path: &CadlagPath) -> Option<DerivativeBundle> {
        None
    }

    /// Smallest path dimension the functional can be evaluated on.
    fn min_dim(&self) -> usize {
        1
    }

    /// `F(t_k, ω)` for every `t_k` in `times`.
    fn trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.value(t, path)).collect()
    }

    /// `F(t_k, ω_{∧t_{k-1}})`, with `F(t_0, ω)` in the first slot.
    fn frozen_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(times.len());
        if let Some(&t0) = times.first() {
            out.push(self.value(t0, path));
        }
        for w in times.windows(2) {
            out.push(self.value(w[1], &path.stopped(w[0])));
        }
        out
    }

    /// Bundles at every `(t_k, ω)`.
    fn analytic_trajectory(
        &self,
        path: &CadlagPath,
        times: &[f64],
    ) -> Option<Vec<DerivativeBundle>> {
        times.iter().map(|&t| self.analytic(t, path)).collect()
    }

    /// Bundles at `(t_k, ω_{∧t_{k-1}})` for `k ≥ 1`: one per partition interval.
    fn predictable_bundles(
        &self,
        path: &CadlagPath,
        times: &[f64],
    ) -> Option<Vec<DerivativeBundle>> {
        times.windows(2).map(|w| self.analytic(w[1], &path.stopped(w[0]))).collect()
    }
}

/// Shared handle to a [`Functional`] with domain and lifetime checks.
#[derive(Clone)]
pub struct CausalFunctional {
    inner: Arc<dyn Functional>,
}

impl fmt::Debug for CausalFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("CausalFunctional").field(&self.inner.label()).finish()
    }
}

struct Closure<V, B> {
    label: String,
    value: V,
    bundle: Option<B>,
}

type NoBundle = fn(f64, &CadlagPath) -> DerivativeBundle;

impl<V, B> Functional for Closure<V, B>
where
    V: Fn(f64, &CadlagPath) -> f64 + Send + Sync,
    B: Fn(f64, &CadlagPath) -> DerivativeBundle + Send + Sync,
{
    fn label(&self) -> String {
        self.label.clone()
    }

    fn value(&self, t: f64, path: &CadlagPath) -> f64 {
        (self.value)(t, path)
    }

    fn has_analytic(&self) -> bool {
        self.bundle.is_some()
    }

    fn analytic(&self, t: f64, path: &CadlagPath) -> Option<DerivativeBundle> {
        self.bundle.as_ref().map(|b| b(t, path))
    }
}

impl CausalFunctional {
    pub fn new(functional: impl Functional + 'static) -> Self {
        Self { inner: Arc::new(functional) }
    }

    /// Wraps a closure. The closure must be causal and side-effect free.
    pub fn from_fn(
        label: impl Into<String>,
        value: impl Fn(f64, &CadlagPath) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(Closure::<_, NoBundle> { label: label.into(), value, bundle: None })
    }

    pub fn from_fn_with_bundle(
        label: impl Into<String>,
        value: impl Fn(f64, &CadlagPath) -> f64 + Send + Sync + 'static,
        bundle: impl Fn(f64, &CadlagPath) -> DerivativeBundle + Send + Sync + 'static,
    ) -> Self {
        Self::new(Closure { label: label.into(), value, bundle: Some(bundle) })
    }

    pub fn label(&self) -> String {
        self.inner.label()
    }

    pub fn has_analytic(&self) -> bool {
        self.inner.has_analytic()
    }

    pub fn inner(&self) -> &dyn Functional {
        self.inner.as_ref()
    }

    pub fn min_dim(&self) -> usize {
        self.inner.min_dim()
    }

    fn check_path(&self, path: &CadlagPath) -> Result<()> {
        if path.dim() < self.inner.min_dim() {
            return Err(Error::DimensionMismatch { expected: self.inner.min_dim(), got: path.dim() });
        }
        Ok(())
    }

    fn check_times(&self, path: &CadlagPath, times: &[f64]) -> Result<()> {
        self.check_path(path)?;
        for &t in times {
            path.check_time(t)?;
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("probe times must be sorted".into()));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, path: &CadlagPath) -> Result<f64> {
        self.check_path(path)?;
        path.check_time(t)?;
        Ok(if path.is_alive(t) { self.inner.value(t, path) } else { 0.0 })
    }

    /// The analytic bundle, or `None` when the functional has none.
    pub fn bundle(&self, t: f64, path: &CadlagPath) -> Result<Option<DerivativeBundle>> {
        self.check_path(path)?;
        path.check_time(t)?;
        if !self.inner.has_analytic() {
            return Ok(None);
        }
        if !path.is_alive(t) {
            return Ok(Some(DerivativeBundle::zero(path.dim())));
        }
        Ok(self.inner.analytic(t, path))
    }

    pub fn require_bundle(&self, t: f64, path: &CadlagPath) -> Result<DerivativeBundle> {
        self.bundle(t, path)?.ok_or_else(|| Error::MissingBundle(self.label()))
    }

    pub fn trajectory(&self, path: &CadlagPath, times: &[f64]) -> Result<Vec<f64>> {
        self.check_times(path, times)?;
        let mut out = self.inner.trajectory(path, times);
        zero_dead(path, times, &mut out);
        Ok(out)
    }

    /// `F` along the path's own knots, as a scalar step path on the same grid.
    pub fn knot_path(&self, path: &CadlagPath) -> Result<CadlagPath> {
        let values = self.trajectory(path, path.times())?;
        CadlagPath::scalar(path.grid().clone(), values)?.with_horizon(path.horizon())
    }

    pub fn frozen_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Result<Vec<f64>> {
        self.check_times(path, times)?;
        let mut out = self.inner.frozen_trajectory(path, times);
        zero_dead(path, times, &mut out);
        Ok(out)
    }

    pub fn analytic_trajectory(
        &self,
        path: &CadlagPath,
        times: &[f64],
    ) -> Result<Vec<DerivativeBundle>> {
        self.check_times(path, times)?;
        let mut out = self
            .inner
            .has_analytic()
            .then(|| self.inner.analytic_trajectory(path, times))
            .flatten()
            .ok_or_else(|| Error::MissingBundle(self.label()))?;
        for (b, &t) in out.iter_mut().zip(times) {
            if !path.is_alive(t) {
                *b = DerivativeBundle::zero(path.dim());
            }
        }
        Ok(out)
    }

    pub fn predictable_bundles(
        &self,
        path: &CadlagPath,
        times: &[f64],
    ) -> Result<Vec<DerivativeBundle>> {
        self.check_times(path, times)?;
        let mut out = self
            .inner
            .has_analytic()
            .then(|| self.inner.predictable_bundles(path, times))
            .flatten()
            .ok_or_else(|| Error::MissingBundle(self.label()))?;
        for (b, &t) in out.iter_mut().zip(times.iter().skip(1)) {
            if !path.is_alive(t) {
                *b = DerivativeBundle::zero(path.dim());
            }
        }
        Ok(out)
    }
}

fn zero_dead(path: &CadlagPath, times: &[f64], values: &mut [f64]) {
    if path.lifetime().is_some() {
        for (v, &t) in values.iter_mut().zip(times) {
            if !path.is_alive(t) {
                *v = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Partition;

    #[test]
    fn lifetime_zeroes_values_and_bundles() {
        let path = CadlagPath::constant(vec![2.0], 1.0).unwrap().with_lifetime(0.5);
        let f = state_1d(|_, x| x * x, |_, _| 0.0, |_, x| 2.0 * x, |_, _| 2.0);
        assert_eq!(f.eval(0.25, &path).unwrap(), 4.0);
        assert_eq!(f.eval(0.5, &path).unwrap(), 0.0);
        assert_eq!(f.bundle(0.75, &path).unwrap(), Some(DerivativeBundle::zero(1)));
        assert_eq!(f.trajectory(&path, &[0.0, 0.5, 1.0]).unwrap(), vec![4.0, 0.0, 0.0]);
    }

    #[test]
    fn domain_is_checked() {
        let path = CadlagPath::constant(vec![2.0], 1.0).unwrap();
        assert!(matches!(time().eval(1.5, &path), Err(Error::Domain { .. })));
        assert!(time().trajectory(&path, &[0.5, 0.25]).is_err());
        assert!(matches!(terminal_value(1).eval(0.5, &path), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn missing_bundle_is_reported() {
        let f = CausalFunctional::from_fn("opaque", |t, _| t);
        let path = CadlagPath::constant(vec![0.0], 1.0).unwrap();
        assert_eq!(f.bundle(0.5, &path).unwrap(), None);
        assert!(matches!(f.require_bundle(0.5, &path), Err(Error::MissingBundle(_))));
        assert!(f.analytic_trajectory(&path, &[0.0, 0.5]).is_err());
    }

    #[test]
    fn default_frozen_trajectory_uses_stopped_paths() {
        let grid = Partition::dyadic(1.0, 2).unwrap();
        let path = CadlagPath::scalar_from_fn(grid, |t| t);
        let f = CausalFunctional::from_fn("t*x", |t, w| t * w.eval(t).unwrap()[0]);
        let frozen = f.frozen_trajectory(&path, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(frozen, vec![0.0, 0.0, 0.5]);
    }
}
