use nalgebra::{DMatrix, DVector};

use super::{CausalFunctional, DerivativeBundle, Functional};
use crate::path::CadlagPath;

type ScalarFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(f64, &[f64]) -> DVector<f64> + Send + Sync;
type MatrixFn = dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync;

struct State {
    f: Box<ScalarFn>,
    df_dt: Box<ScalarFn>,
    df_dx: Box<VectorFn>,
    d2f_dx2: Box<MatrixFn>,
}

impl State {
    fn bundle_at(&self, t: f64, x: &[f64]) -> DerivativeBundle {
        DerivativeBundle::new((self.df_dt)(t, x), (self.df_dx)(t, x), (self.d2f_dx2)(t, x))
    }
}

impl Functional for State {
    fn label(&self) -> String {
        "state".into()
    }

    fn value(&self, t: f64, path: &CadlagPath) -> f64 {
        (self.f)(t, path.knot(path.index_at(t)))
    }

    fn has_analytic(&self) -> bool {
        true
    }

    fn analytic(&self, t: f64, path: &CadlagPath) -> Option<DerivativeBundle> {
        Some(self.bundle_at(t, path.knot(path.index_at(t))))
    }

    fn frozen_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = times.first().map(|&t| self.value(t, path)).into_iter().collect();
        out.extend(times.windows(2).map(|w| (self.f)(w[1], path.knot(path.index_at(w[0])))));
        out
    }

    fn predictable_bundles(
        &self,
        path: &CadlagPath,
        times: &[f64],
    ) -> Option<Vec<DerivativeBundle>> {
        Some(
            times
                .windows(2)
                .map(|w| self.bundle_at(w[1], path.knot(path.index_at(w[0]))))
                .collect(),
        )
    }
}

/// `F(t, ω) = f(t, ω(t))` with caller-supplied `∂f/∂t`, `∇f` and `Hess f`.
pub fn state(
    f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    df_dt: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    df_dx: impl Fn(f64, &[f64]) -> DVector<f64> + Send + Sync + 'static,
    d2f_dx2: impl Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
) -> CausalFunctional {
    CausalFunctional::new(State {
        f: Box::new(f),
        df_dt: Box::new(df_dt),
        df_dx: Box::new(df_dx),
        d2f_dx2: Box::new(d2f_dx2),
    })
}

/// [`state`] for `f(t, x)` of the first coordinate only.
pub fn state_1d(
    f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    df_dt: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    df_dx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    d2f_dx2: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
) -> CausalFunctional {
    state(
        move |t, x| f(t, x[0]),
        move |t, x| df_dt(t, x[0]),
        move |t, x| {
            let mut g = DVector::zeros(x.len());
            g[0] = df_dx(t, x[0]);
            g
        },
        move |t, x| {
            let mut h = DMatrix::zeros(x.len(), x.len());
            h[(0, 0)] = d2f_dx2(t, x[0]);
            h
        },
    )
}

struct RunningIntegral {
    f: Box<ScalarFn>,
}

impl RunningIntegral {
    fn tables(&self, path: &CadlagPath) -> (Vec<f64>, Vec<f64>) {
        let times = path.times();
        let rates: Vec<f64> =
            (0..times.len()).map(|j| (self.f)(times[j], path.knot(j))).collect();
        (integral_prefix(times, &rates), rates)
    }
}

/// Prefix sums `C_j = Σ_{i<j} rate_i (t_{i+1} - t_i)` of a step integrand.
pub(crate) fn integral_prefix(times: &[f64], rates: &[f64]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    prefix.push(acc);
    for j in 1..times.len() {
        acc += rates[j - 1] * (times[j] - times[j - 1]);
        prefix.push(acc);
    }
    prefix
}

/// Integral of the step integrand up to `t`, using only knots with index `< limit`.
pub(crate) fn integral_at(
    path: &CadlagPath,
    prefix: &[f64],
    rates: &[f64],
    t: f64,
    limit: usize,
) -> f64 {
    let below = path.grid().count_lt(t).min(limit);
    if below == 0 {
        return 0.0;
    }
    let j = below - 1;
    prefix[j] + rates[j] * (t - path.times()[j])
}

impl Functional for RunningIntegral {
    fn label(&self) -> String {
        "running_integral".into()
    }

    fn value(&self, t: f64, path: &CadlagPath) -> f64 {
        let times = path.times();
        let mut acc = 0.0;
        let mut last = None;
        for j in 0..path.grid().count_lt(t) {
            if j > 0 {
                acc += (self.f)(times[j - 1], path.knot(j - 1)) * (times[j] - times[j - 1]);
            }
            last = Some(j);
        }
        match last {
            None => 0.0,
            Some(j) => acc + (self.f)(times[j], path.knot(j)) * (t - times[j]),
        }
    }

    fn has_analytic(&self) -> bool {
        true
    }

    fn analytic(&self, t: f64, path: &CadlagPath) -> Option<DerivativeBundle> {
        let mut b = DerivativeBundle::zero(path.dim());
        b.d0 = (self.f)(t, path.knot(path.index_at(t)));
        Some(b)
    }

    fn trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        let (prefix, rates) = self.tables(path);
        times
            .iter()
            .map(|&t| integral_at(path, &prefix, &rates, t, usize::MAX))
            .collect()
    }

    fn frozen_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        let (prefix, rates) = self.tables(path);
        let mut out: Vec<f64> = times
            .first()
            .map(|&t| integral_at(path, &prefix, &rates, t, usize::MAX))
            .into_iter()
            .collect();
        out.extend(times.windows(2).map(|w| {
            let alive = path.grid().count_le(w[0]);
            integral_at(path, &prefix, &rates, w[1], alive)
        }));
        out
    }

    fn predictable_bundles(
        &self,
        path: &CadlagPath,
        times: &[f64],
    ) -> Option<Vec<DerivativeBundle>> {
        Some(
            times
                .windows(2)
                .map(|w| {
                    let mut b = DerivativeBundle::zero(path.dim());
                    b.d0 = (self.f)(w[1], path.knot(path.index_at(w[0])));
                    b
                })
                .collect(),
        )
    }
}

/// `F(t, ω) = ∫₀ᵗ f(r, ω(r)) dr`, exact for the step path up to a left-point
/// rule in the explicit time argument of `f`.
pub fn running_integral(
    f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
) -> CausalFunctional {
    CausalFunctional::new(RunningIntegral { f: Box::new(f) })
}

struct Time;

impl Functional for Time {
    fn label(&self) -> String {
        "time".into()
    }

    fn value(&self, t: f64, _path: &CadlagPath) -> f64 {
        t
    }

    fn frozen_trajectory(&self, _path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        times.to_vec()
    }

    fn has_analytic(&self) -> bool {
        true
    }

    fn analytic(&self, _t: f64, path: &CadlagPath) -> Option<DerivativeBundle> {
        let mut b = DerivativeBundle::zero(path.dim());
        b.d0 = 1.0;
        Some(b)
    }
}

/// `F(t, ω) = t`.
pub fn time() -> CausalFunctional {
    CausalFunctional::new(Time)
}

struct Constant(f64);

impl Functional for Constant {
    fn label(&self) -> String {
        format!("constant({})", self.0)
    }

    fn value(&self, _t: f64, _path: &CadlagPath) -> f64 {
        self.0
    }

    fn frozen_trajectory(&self, _path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        vec![self.0; times.len()]
    }

    fn has_analytic(&self) -> bool {
        true
    }

    fn analytic(&self, _t: f64, path: &CadlagPath) -> Option<DerivativeBundle> {
        Some(DerivativeBundle::zero(path.dim()))
    }
}

pub fn constant(c: f64) -> CausalFunctional {
    CausalFunctional::new(Constant(c))
}

struct TerminalValue(usize);

impl Functional for TerminalValue {
    fn label(&self) -> String {
        format!("terminal_value({})", self.0)
    }

    fn value(&self, _t: f64, path: &CadlagPath) -> f64 {
        path.knot(path.knot_count() - 1)[self.0]
    }

    fn min_dim(&self) -> usize {
        self.0 + 1
    }
}

/// `F(t, ω) = ω^i(T)`. Anticipating: not a causal functional, used to
/// exercise the causality guards.
pub fn terminal_value(coordinate: usize) -> CausalFunctional {
    CausalFunctional::new(TerminalValue(coordinate))
}

struct JumpIndicator;

impl Functional for JumpIndicator {
    fn label(&self) -> String {
        "jump_indicator".into()
    }

    fn value(&self, t: f64, path: &CadlagPath) -> f64 {
        let k = path.grid().count_le(t) - 1;
        if k == 0 || path.times()[k] != t {
            return 0.0;
        }
        let jumped = path.knot(k).iter().zip(path.knot(k - 1)).any(|(a, b)| a != b);
        if jumped {
            1.0
        } else {
            0.0
        }
    }
}

/// `F(t, ω) = 1_{Δ_t X(ω) ≠ 0}`: causal, but without a space derivative.
pub fn jump_indicator() -> CausalFunctional {
    CausalFunctional::new(JumpIndicator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Partition;

    fn ramp(level: u32) -> CadlagPath {
        CadlagPath::scalar_from_fn(Partition::dyadic(1.0, level).unwrap(), |t| t)
    }

    #[test]
    fn state_bundle_examples() {
        let x = state_1d(|_, x| x, |_, _| 0.0, |_, _| 1.0, |_, _| 0.0);
        let path = CadlagPath::constant(vec![3.0], 1.0).unwrap();
        let b = x.require_bundle(0.5, &path).unwrap();
        assert_eq!((b.d0, b.grad[0], b.hess[(0, 0)]), (0.0, 1.0, 0.0));

        let t = state_1d(|t, _| t, |_, _| 1.0, |_, _| 0.0, |_, _| 0.0);
        let b = t.require_bundle(0.5, &path).unwrap();
        assert_eq!((b.d0, b.grad[0], b.hess[(0, 0)]), (1.0, 0.0, 0.0));

        let s = state_1d(|t, x| x.sin() + t, |_, _| 1.0, |_, x| x.cos(), |_, x| -x.sin());
        let zero = CadlagPath::constant(vec![0.0], 1.0).unwrap();
        let b = s.require_bundle(0.5, &zero).unwrap();
        assert_eq!((b.d0, b.grad[0], b.hess[(0, 0)]), (1.0, 1.0, 0.0));
    }

    #[test]
    fn running_integral_examples() {
        let one = running_integral(|_, _| 1.0);
        let path = ramp(4);
        for t in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(one.eval(t, &path).unwrap(), t);
        }
        let c = CadlagPath::constant(vec![2.5], 1.0).unwrap();
        let ident = running_integral(|_, x| x[0]);
        assert_eq!(ident.eval(0.75, &c).unwrap(), 2.5 * 0.75);
        // left Riemann sum of t on a grid of 4 steps: (0 + .25 + .5 + .75) * .25
        assert_eq!(ident.eval(1.0, &ramp(2)).unwrap(), 0.375);
    }

    #[test]
    fn running_integral_trajectories_match_pointwise() {
        let f = running_integral(|t, x| (t + x[0]).cos());
        let path = CadlagPath::scalar_from_fn(Partition::dyadic(1.0, 5).unwrap(), |t| (7.0 * t).sin());
        let probes: Vec<f64> = (0..=40).map(|k| k as f64 / 40.0).collect();
        let fast = f.trajectory(&path, &probes).unwrap();
        let slow: Vec<f64> = probes.iter().map(|&t| f.eval(t, &path).unwrap()).collect();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
        }
        let frozen = f.frozen_trajectory(&path, &probes).unwrap();
        for (k, w) in probes.windows(2).enumerate() {
            let direct = f.eval(w[1], &path.stop(w[0]).unwrap()).unwrap();
            assert!((frozen[k + 1] - direct).abs() <= 1e-15);
        }
    }

    #[test]
    fn time_and_constant() {
        let path = ramp(3);
        assert_eq!(time().eval(0.3, &path).unwrap(), 0.3);
        assert_eq!(time().require_bundle(0.3, &path).unwrap().d0, 1.0);
        assert_eq!(constant(4.0).eval(0.9, &path).unwrap(), 4.0);
        assert_eq!(constant(4.0).require_bundle(0.9, &path).unwrap(), DerivativeBundle::zero(1));
    }

    #[test]
    fn jump_indicator_sees_only_actual_jumps() {
        let j = CadlagPath::scalar(Partition::new(vec![0.0, 0.5, 0.75]).unwrap(), vec![0.0, 1.0, 1.0])
            .unwrap()
            .with_horizon(1.0)
            .unwrap();
        let f = jump_indicator();
        assert_eq!(f.eval(0.5, &j).unwrap(), 1.0);
        assert_eq!(f.eval(0.75, &j).unwrap(), 0.0);
        assert_eq!(f.eval(0.6, &j).unwrap(), 0.0);
        assert_eq!(f.eval(0.0, &j).unwrap(), 0.0);
    }
}
