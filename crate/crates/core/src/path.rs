//! Time grids and right-continuous step paths.
//!
//! A [`CadlagPath`] is a finite list of knots `t_0 = 0 < t_1 < ... < t_m` with a
//! `d`-vector attached to each knot, read as the step function
//! `ω(t) = value at the last knot ≤ t` on `[0, horizon]`. Every path in the
//! crate is of this form; continuous semimartingale paths are represented by
//! their values on a fine grid.
//!
//! The two perturbations the causal calculus is built from live here:
//! [`CadlagPath::stop`] (`ω_{∧t}`) and [`CadlagPath::bump`] (`ω^{t,r}`).

use crate::error::{Error, Result};

/// A strictly increasing time grid whose first point is exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    times: Vec<f64>,
}

/// Half-open convention used when bracketing a time by partition points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bracket {
    /// `t ∈ [left, right)`: a partition point brackets as `(p, successor(p))`.
    LeftClosed,
    /// `t ∈ (left, right]`: a partition point brackets as `(predecessor(p), p)`.
    RightClosed,
}

impl Partition {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        match times.first() {
            None => return Err(Error::InvalidPartition("no time points".into())),
            Some(&t0) if t0 != 0.0 => {
                return Err(Error::InvalidPartition(format!(
                    "first time point must be 0, got {t0}"
                )))
            }
            _ => {}
        }
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidPartition(format!("non-finite time point {t}")));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPartition(format!(
                "time points not strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { times })
    }

    /// Uniform grid of `2^level` steps on `[0, horizon]`; the last point is `horizon` exactly.
    pub fn dyadic(horizon: f64, level: u32) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidPartition(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        if level > 40 {
            return Err(Error::InvalidPartition(format!("level {level} too fine")));
        }
        let steps = 1usize << level;
        let step = horizon / steps as f64;
        let times = (0..=steps)
            .map(|k| if k == steps { horizon } else { k as f64 * step })
            .collect();
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Largest gap between consecutive points; 0 for a single-point partition.
    pub fn mesh(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Number of points `≤ t`.
    pub(crate) fn count_le(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// Number of points `< t`.
    pub(crate) fn count_lt(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s < t)
    }

    fn check_span(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 || t > self.last() {
            Err(Error::Domain { t, horizon: self.last() })
        } else {
            Ok(())
        }
    }

    /// `t_π`: the last partition point `≤ t`.
    pub fn nearest_left(&self, t: f64) -> Result<f64> {
        self.check_span(t)?;
        Ok(self.times[self.count_le(t) - 1])
    }

    /// `t^π`: the first partition point `> t`. Fails at or beyond the last point.
    pub fn nearest_right(&self, t: f64) -> Result<f64> {
        self.check_span(t)?;
        self.times
            .get(self.count_le(t))
            .copied()
            .ok_or(Error::Domain { t, horizon: self.last() })
    }

    /// The pair of neighbouring partition points around `t` under `convention`.
    pub fn bracket(&self, t: f64, convention: Bracket) -> Result<(f64, f64)> {
        self.check_span(t)?;
        let out_of_range = Error::Domain { t, horizon: self.last() };
        match convention {
            Bracket::LeftClosed => {
                let k = self.count_le(t);
                match self.times.get(k) {
                    Some(&right) => Ok((self.times[k - 1], right)),
                    None => Err(out_of_range),
                }
            }
            Bracket::RightClosed => {
                let k = self.count_lt(t);
                if k == 0 {
                    return Err(out_of_range);
                }
                Ok((self.times[k - 1], self.times[k]))
            }
        }
    }
}

/// Left limit of a path. At `t = 0` there is no numeric left limit: the
/// pre-start state stands in for the cemetery convention `X_{0-} = ζ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeftLimit<'a> {
    PreStart,
    Value(&'a [f64]),
}

impl<'a> LeftLimit<'a> {
    pub fn value(self) -> Option<&'a [f64]> {
        match self {
            LeftLimit::PreStart => None,
            LeftLimit::Value(v) => Some(v),
        }
    }
}

/// Right-continuous `d`-dimensional step path on `[0, horizon]`.
///
/// Equality is functional: two paths are equal when they have the same
/// dimension, horizon and lifetime and take the same value at every time,
/// regardless of redundant knots.
#[derive(Debug, Clone)]
pub struct CadlagPath {
    grid: Partition,
    /// Row-major, `grid.len() * dim` entries.
    values: Vec<f64>,
    dim: usize,
    horizon: f64,
    lifetime: Option<f64>,
}

impl CadlagPath {
    /// Builds a path from row-major values, one `dim`-row per grid point.
    /// The horizon defaults to the last grid point.
    pub fn new(grid: Partition, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be at least 1".into()));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::InvalidPath(format!(
                "{} values for {} grid points of dimension {dim}",
                values.len(),
                grid.len()
            )));
        }
        let horizon = grid.last();
        Ok(Self { grid, values, dim, horizon, lifetime: None })
    }

    pub fn from_rows(grid: Partition, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidPath("rows of unequal length".into()));
        }
        Self::new(grid, rows.concat(), dim)
    }

    pub fn scalar(grid: Partition, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, values, 1)
    }

    /// Scalar path sampling `f` at every grid point.
    pub fn scalar_from_fn(grid: Partition, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.times().iter().map(|&t| f(t)).collect();
        let horizon = grid.last();
        Self { grid, values, dim: 1, horizon, lifetime: None }
    }

    /// The constant path `value` on `[0, horizon]`.
    pub fn constant(value: Vec<f64>, horizon: f64) -> Result<Self> {
        let dim = value.len();
        Self::new(Partition { times: vec![0.0] }, value, dim)?.with_horizon(horizon)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= self.grid.last()) {
            return Err(Error::InvalidPath(format!(
                "horizon {horizon} precedes the last knot {}",
                self.grid.last()
            )));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_lifetime(mut self, lifetime: f64) -> Self {
        self.lifetime = Some(lifetime);
        self
    }

    pub fn grid(&self) -> &Partition {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn lifetime(&self) -> Option<f64> {
        self.lifetime
    }

    pub fn is_alive(&self, t: f64) -> bool {
        self.lifetime.map_or(true, |l| t < l)
    }

    pub fn knot_count(&self) -> usize {
        self.grid.len()
    }

    pub fn knot(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Index of the last knot `≤ t`, for `t ≥ 0`.
    pub(crate) fn index_at(&self, t: f64) -> usize {
        self.grid.count_le(t).max(1) - 1
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 || t > self.horizon {
            Err(Error::Domain { t, horizon: self.horizon })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_coordinate(&self, index: usize) -> Result<()> {
        if index < self.dim {
            Ok(())
        } else {
            Err(Error::Coordinate { index, dim: self.dim })
        }
    }

    /// `X_t(ω) = ω(t)`.
    pub fn eval(&self, t: f64) -> Result<&[f64]> {
        self.check_time(t)?;
        Ok(self.knot(self.index_at(t)))
    }

    pub fn eval_coord(&self, t: f64, index: usize) -> Result<f64> {
        self.check_coordinate(index)?;
        Ok(self.eval(t)?[index])
    }

    /// `X_{t-}(ω)`: the value at the last knot strictly before `t`.
    pub fn left_limit(&self, t: f64) -> Result<LeftLimit<'_>> {
        self.check_time(t)?;
        let k = self.grid.count_lt(t);
        Ok(if k == 0 { LeftLimit::PreStart } else { LeftLimit::Value(self.knot(k - 1)) })
    }

    /// `Δ_t X(ω)`; `None` at `t = 0` where the left limit is the pre-start state.
    pub fn jump(&self, t: f64) -> Result<Option<Vec<f64>>> {
        let now = self.eval(t)?;
        Ok(self
            .left_limit(t)?
            .value()
            .map(|before| now.iter().zip(before).map(|(a, b)| a - b).collect()))
    }

    /// Scalar path of coordinate `index` on the same grid.
    pub fn coordinate(&self, index: usize) -> Result<CadlagPath> {
        self.check_coordinate(index)?;
        let values = self.values.iter().skip(index).step_by(self.dim).copied().collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
            dim: 1,
            horizon: self.horizon,
            lifetime: self.lifetime,
        })
    }

    /// `ω_{∧t}(s) = ω(s ∧ t)`: the path stopped at `t`.
    pub fn stop(&self, t: f64) -> Result<CadlagPath> {
        self.check_time(t)?;
        Ok(self.stopped(t))
    }

    pub(crate) fn stopped(&self, t: f64) -> CadlagPath {
        let keep = self.grid.count_le(t).max(1);
        Self {
            grid: Partition { times: self.grid.times[..keep].to_vec() },
            values: self.values[..keep * self.dim].to_vec(),
            dim: self.dim,
            horizon: self.horizon,
            lifetime: self.lifetime,
        }
    }

    /// Keeps the knots in `[0, horizon]` and shortens the horizon.
    pub(crate) fn truncated(&self, horizon: f64) -> CadlagPath {
        let mut out = self.stopped(horizon);
        out.horizon = horizon;
        out
    }

    /// `ω^{t,r}(s) = ω(s ∧ t) + r·1_{s ≥ t}`: stop at `t` and jump by `r` there.
    pub fn bump(&self, t: f64, r: &[f64]) -> Result<CadlagPath> {
        self.check_time(t)?;
        if r.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: r.len() });
        }
        Ok(self.bumped(t, r))
    }

    pub(crate) fn bumped(&self, t: f64, r: &[f64]) -> CadlagPath {
        let keep = self.grid.count_lt(t);
        let mut times = Vec::with_capacity(keep + 1);
        times.extend_from_slice(&self.grid.times[..keep]);
        times.push(t);
        let mut values = Vec::with_capacity((keep + 1) * self.dim);
        values.extend_from_slice(&self.values[..keep * self.dim]);
        let at = self.knot(self.index_at(t));
        values.extend(at.iter().zip(r).map(|(v, dr)| v + dr));
        Self {
            grid: Partition { times },
            values,
            dim: self.dim,
            horizon: self.horizon,
            lifetime: self.lifetime,
        }
    }

    /// `ω^π`: the path sampled at the points of `partition` and held constant
    /// in between. `partition` must reach the horizon.
    pub fn piecewise_const(&self, partition: &Partition) -> Result<CadlagPath> {
        if partition.last() < self.horizon {
            return Err(Error::InvalidArgument(format!(
                "partition ends at {} before the horizon {}",
                partition.last(),
                self.horizon
            )));
        }
        let keep = partition.count_le(self.horizon);
        let times = partition.times()[..keep].to_vec();
        let mut values = Vec::with_capacity(keep * self.dim);
        for &t in &times {
            values.extend_from_slice(self.knot(self.index_at(t)));
        }
        Ok(Self {
            grid: Partition { times },
            values,
            dim: self.dim,
            horizon: self.horizon,
            lifetime: self.lifetime,
        })
    }

    /// `sup_{s ≤ until} |a(s) - b(s)|_∞`, attained on the union of both grids.
    pub fn sup_distance(&self, other: &CadlagPath, until: f64) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        self.check_time(until)?;
        other.check_time(until)?;
        let mut sup = 0.0f64;
        for_each_union_knot(self.times(), other.times(), until, |i, j| {
            let diff = self
                .knot(i)
                .iter()
                .zip(other.knot(j))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            sup = sup.max(diff);
        });
        Ok(sup)
    }
}

/// Walks the merged knot times of two grids up to `until`, calling `visit`
/// with the index of the last knot `≤ s` in each grid at every merged time `s`.
pub(crate) fn for_each_union_knot(
    a: &[f64],
    b: &[f64],
    until: f64,
    mut visit: impl FnMut(usize, usize),
) {
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        visit(i, j);
        let next_a = a.get(i + 1).copied().filter(|&t| t <= until);
        let next_b = b.get(j + 1).copied().filter(|&t| t <= until);
        match (next_a, next_b) {
            (None, None) => break,
            (Some(ta), Some(tb)) if ta == tb => {
                i += 1;
                j += 1;
            }
            (Some(ta), Some(tb)) if ta < tb => i += 1,
            (Some(_), None) => i += 1,
            _ => j += 1,
        }
    }
}

impl PartialEq for CadlagPath {
    fn eq(&self, other: &Self) -> bool {
        if self.dim != other.dim || self.horizon != other.horizon || self.lifetime != other.lifetime
        {
            return false;
        }
        let mut equal = true;
        for_each_union_knot(self.times(), other.times(), self.horizon, |i, j| {
            equal &= self.knot(i) == other.knot(j);
        });
        equal
    }
}
