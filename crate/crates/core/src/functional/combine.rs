use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{CausalFunctional, DerivativeBundle, Functional};
use crate::error::{Error, Result};
use crate::path::CadlagPath;

/// A twice continuously differentiable `g: ℝᵐ → ℝ` with its gradient and Hessian.
#[derive(Clone)]
pub struct SmoothMap {
    pub label: String,
    pub value: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub grad: Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>,
    pub hess: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>,
}

impl SmoothMap {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        hess: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), value: Arc::new(value), grad: Arc::new(grad), hess: Arc::new(hess) }
    }

    /// `exp` of a single argument.
    pub fn exp() -> Self {
        Self::new(
            "exp",
            |y| y[0].exp(),
            |y| DVector::from_element(1, y[0].exp()),
            |y| DMatrix::from_element(1, 1, y[0].exp()),
        )
    }
}

#[derive(Clone)]
pub enum Combine {
    Sum,
    Product,
    /// `Σ_a w_a F_a`.
    Linear(Vec<f64>),
    Compose(SmoothMap),
}

struct Composite {
    op: Combine,
    parts: Vec<CausalFunctional>,
}

impl Composite {
    fn apply(&self, ys: &[f64]) -> f64 {
        match &self.op {
            Combine::Sum => ys.iter().fold(0.0, |acc, y| acc + y),
            Combine::Product => ys.iter().fold(1.0, |acc, y| acc * y),
            Combine::Linear(w) => w.iter().zip(ys).fold(0.0, |acc, (w, y)| acc + w * y),
            Combine::Compose(g) => (g.value)(ys),
        }
    }

    /// Chain rule: `∂₀ = Σ g_a ∂₀F_a`, `∇ = Σ g_a ∇F_a`,
    /// `Δ = Σ g_a ΔF_a + Σ g_ab ∇F_a ∇F_bᵀ`.
    fn chain(&self, ys: &[f64], parts: &[DerivativeBundle], dim: usize) -> DerivativeBundle {
        let mut out = DerivativeBundle::zero(dim);
        let linear = |weights: &mut dyn Iterator<Item = f64>, out: &mut DerivativeBundle| {
            for (w, b) in weights.zip(parts) {
                out.d0 += w * b.d0;
                out.grad += w * &b.grad;
                out.hess += w * &b.hess;
            }
        };
        match &self.op {
            Combine::Sum => linear(&mut std::iter::repeat(1.0), &mut out),
            Combine::Linear(w) => linear(&mut w.iter().copied(), &mut out),
            Combine::Product => {
                let m = ys.len();
                let others = |skip: &[usize]| -> f64 {
                    (0..m).filter(|c| !skip.contains(c)).map(|c| ys[c]).product()
                };
                linear(&mut (0..m).map(|a| others(&[a])), &mut out);
                for a in 0..m {
                    for b in 0..m {
                        if a != b {
                            let w = others(&[a, b]);
                            out.hess += w * &parts[a].grad * parts[b].grad.transpose();
                        }
                    }
                }
            }
            Combine::Compose(g) => {
                let gg = (g.grad)(ys);
                let gh = (g.hess)(ys);
                linear(&mut gg.iter().copied(), &mut out);
                for a in 0..ys.len() {
                    for b in 0..ys.len() {
                        if gh[(a, b)] != 0.0 {
                            out.hess += gh[(a, b)] * &parts[a].grad * parts[b].grad.transpose();
                        }
                    }
                }
            }
        }
        out
    }

    fn columns(rows: Vec<Vec<f64>>, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|k| rows.iter().map(|r| r[k]).collect()).collect()
    }

    fn combine_values(&self, per_part: Vec<Vec<f64>>, n: usize) -> Vec<f64> {
        Self::columns(per_part, n).iter().map(|ys| self.apply(ys)).collect()
    }

    fn combine_bundles(
        &self,
        values: Vec<Vec<f64>>,
        bundles: Vec<Vec<DerivativeBundle>>,
        dim: usize,
    ) -> Vec<DerivativeBundle> {
        let n = values.first().map_or(0, Vec::len);
        let ys = Self::columns(values, n);
        (0..n)
            .map(|k| {
                let parts: Vec<DerivativeBundle> = bundles.iter().map(|b| b[k].clone()).collect();
                self.chain(&ys[k], &parts, dim)
            })
            .collect()
    }
}

impl Functional for Composite {
    fn label(&self) -> String {
        let inner: Vec<String> = self.parts.iter().map(CausalFunctional::label).collect();
        let op = match &self.op {
            Combine::Sum => "sum".to_string(),
            Combine::Product => "product".to_string(),
            Combine::Linear(w) => format!("linear{w:?}"),
            Combine::Compose(g) => g.label.clone(),
        };
        format!("{op}({})", inner.join(", "))
    }

    fn value(&self, t: f64, path: &CadlagPath) -> f64 {
        let ys: Vec<f64> = self.parts.iter().map(|p| p.inner().value(t, path)).collect();
        self.apply(&ys)
    }

    fn has_analytic(&self) -> bool {
        self.parts.iter().all(CausalFunctional::has_analytic)
    }

    fn min_dim(&self) -> usize {
        self.parts.iter().map(CausalFunctional::min_dim).max().unwrap_or(1)
    }

    fn analytic(&self, t: f64, path: &CadlagPath) -> Option<DerivativeBundle> {
        let mut ys = Vec::with_capacity(self.parts.len());
        let mut parts = Vec::with_capacity(self.parts.len());
        for p in &self.parts {
            ys.push(p.inner().value(t, path));
            parts.push(p.inner().analytic(t, path)?);
        }
        Some(self.chain(&ys, &parts, path.dim()))
    }

    fn trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        let per_part = self.parts.iter().map(|p| p.inner().trajectory(path, times)).collect();
        self.combine_values(per_part, times.len())
    }

    fn frozen_trajectory(&self, path: &CadlagPath, times: &[f64]) -> Vec<f64> {
        let per_part =
            self.parts.iter().map(|p| p.inner().frozen_trajectory(path, times)).collect();
        self.combine_values(per_part, times.len())
    }

    fn analytic_trajectory(
        &self,
        path: &CadlagPath,
        times: &[f64],
    ) -> Option<Vec<DerivativeBundle>> {
        let values = self.parts.iter().map(|p| p.inner().trajectory(path, times)).collect();
        let bundles = self
            .parts
            .iter()
            .map(|p| p.inner().analytic_trajectory(path, times))
            .collect::<Option<Vec<_>>>()?;
        Some(self.combine_bundles(values, bundles, path.dim()))
    }

    fn predictable_bundles(
        &self,
        path: &CadlagPath,
        times: &[f64],
    ) -> Option<Vec<DerivativeBundle>> {
        let values = self
            .parts
            .iter()
            .map(|p| p.inner().frozen_trajectory(path, times).split_off(1.min(times.len())))
            .collect();
        let bundles = self
            .parts
            .iter()
            .map(|p| p.inner().predictable_bundles(path, times))
            .collect::<Option<Vec<_>>>()?;
        Some(self.combine_bundles(values, bundles, path.dim()))
    }
}

/// Combines functionals pointwise; the analytic bundle follows from the
/// chain and product rules applied to the parts' bundles.
pub fn combine(op: Combine, parts: Vec<CausalFunctional>) -> Result<CausalFunctional> {
    if parts.is_empty() {
        return Err(Error::EmptyCombination);
    }
    if let Combine::Linear(w) = &op {
        if w.len() != parts.len() {
            return Err(Error::DimensionMismatch { expected: parts.len(), got: w.len() });
        }
    }
    Ok(CausalFunctional::new(Composite { op, parts }))
}

/// `Σ_a w_a F_a`.
pub fn linear(weights: Vec<f64>, parts: Vec<CausalFunctional>) -> Result<CausalFunctional> {
    combine(Combine::Linear(weights), parts)
}
