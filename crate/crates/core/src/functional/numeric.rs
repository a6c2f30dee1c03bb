//! Finite-difference causal derivatives, straight from the perturbation
//! definitions: the time derivative moves `t` along the stopped path, the
//! space derivatives bump the path at `t`.

use nalgebra::{DMatrix, DVector};

use super::{CausalFunctional, DerivativeBundle};
use crate::error::{Error, Result};
use crate::path::CadlagPath;

pub const DEFAULT_SPACE_STEP: f64 = 1e-4;

fn positive(h: f64) -> Result<f64> {
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::NonPositiveStep(h))
    }
}

/// Forward difference of `r ↦ F(t + r, ω_{∧t})`. `h` defaults to the mesh of
/// the path grid, or `1e-4 · horizon` for a single-knot path.
pub fn numeric_time_derivative(
    f: &CausalFunctional,
    t: f64,
    path: &CadlagPath,
    h: Option<f64>,
) -> Result<f64> {
    let h = positive(h.unwrap_or_else(|| match path.grid().mesh() {
        m if m > 0.0 => m,
        _ => DEFAULT_SPACE_STEP * path.horizon(),
    }))?;
    path.check_time(t)?;
    if !path.is_alive(t) {
        return Ok(0.0);
    }
    let mut stopped = path.stop(t)?;
    if t + h > stopped.horizon() {
        stopped = stopped.with_horizon(t + h)?;
    }
    Ok((f.eval(t + h, &stopped)? - f.eval(t, &stopped)?) / h)
}

fn bump_along(path: &CadlagPath, t: f64, dirs: &[(usize, f64)]) -> CadlagPath {
    let mut r = vec![0.0; path.dim()];
    for &(i, s) in dirs {
        r[i] += s;
    }
    path.bumped(t, &r)
}

/// Central differences of `r ↦ F(t, ω^{t, r})` per coordinate.
pub fn numeric_gradient(
    f: &CausalFunctional,
    t: f64,
    path: &CadlagPath,
    h: Option<f64>,
) -> Result<DVector<f64>> {
    let h = positive(h.unwrap_or(DEFAULT_SPACE_STEP))?;
    path.check_time(t)?;
    let d = path.dim();
    if !path.is_alive(t) {
        return Ok(DVector::zeros(d));
    }
    let mut g = DVector::zeros(d);
    for i in 0..d {
        let up = f.eval(t, &bump_along(path, t, &[(i, h)]))?;
        let down = f.eval(t, &bump_along(path, t, &[(i, -h)]))?;
        g[i] = (up - down) / (2.0 * h);
    }
    Ok(g)
}

/// Second differences of `r ↦ F(t, ω^{t, r})`, symmetrized.
pub fn numeric_hessian(
    f: &CausalFunctional,
    t: f64,
    path: &CadlagPath,
    h: Option<f64>,
) -> Result<DMatrix<f64>> {
    let h = positive(h.unwrap_or(DEFAULT_SPACE_STEP))?;
    path.check_time(t)?;
    let d = path.dim();
    if !path.is_alive(t) {
        return Ok(DMatrix::zeros(d, d));
    }
    let at = |dirs: &[(usize, f64)]| f.eval(t, &bump_along(path, t, dirs));
    let centre = at(&[])?;
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = (at(&[(i, h)])? - 2.0 * centre + at(&[(i, -h)])?) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                + at(&[(i, -h), (j, -h)])?)
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// All three numeric derivatives; `h_time` defaults to the grid mesh and
/// `h_space` to [`DEFAULT_SPACE_STEP`].
pub fn numeric_bundle(
    f: &CausalFunctional,
    t: f64,
    path: &CadlagPath,
    h_time: Option<f64>,
    h_space: Option<f64>,
) -> Result<DerivativeBundle> {
    Ok(DerivativeBundle::new(
        numeric_time_derivative(f, t, path, h_time)?,
        numeric_gradient(f, t, path, h_space)?,
        numeric_hessian(f, t, path, h_space)?,
    ))
}
