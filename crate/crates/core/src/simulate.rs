//! Seeded generators of continuous semimartingale paths on dyadic grids.
//!
//! Path `index` of an ensemble draws from the ChaCha8 stream
//! `(seed, stream = index)`, so ensembles are identical whatever order or
//! thread count they are produced with. Each grid step consumes one standard
//! normal per driving Brownian coordinate, in coordinate order.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::{require_causal, CausalFunctional};
use crate::path::{CadlagPath, Partition};

pub type LocalVolFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum GeneratorKind {
    /// Independent standard Brownian coordinates.
    Brownian,
    /// `dX = μ(t, X) dt + σ(t, X) dW` by explicit Euler steps. `drift` has
    /// one entry per coordinate, `vol` is `dim × m` for `m` Brownian drivers.
    ItoEuler { drift: Vec<CausalFunctional>, vol: Vec<Vec<CausalFunctional>> },
    /// `dXⁱ = σᵢ(t, Xⁱ_t) dWⁱ`.
    LocalVol { vol: Vec<LocalVolFn> },
}

impl fmt::Debug for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Brownian => write!(f, "brownian"),
            Self::ItoEuler { .. } => write!(f, "ito_euler"),
            Self::LocalVol { .. } => write!(f, "local_vol"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub dim: usize,
    pub horizon: f64,
    /// The grid is `dyadic(horizon, level)`.
    pub level: u32,
    pub seed: u64,
    /// Starting point; empty means the origin.
    pub x0: Vec<f64>,
}

impl GeneratorSpec {
    pub fn brownian(dim: usize, horizon: f64, level: u32, seed: u64) -> Self {
        Self { kind: GeneratorKind::Brownian, dim, horizon, level, seed, x0: Vec::new() }
    }

    pub fn with_kind(mut self, kind: GeneratorKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Self {
        self.x0 = x0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_level(mut self, level: u32) -> Self {
        self.level = level;
        self
    }

    fn start(&self) -> Vec<f64> {
        if self.x0.is_empty() {
            vec![0.0; self.dim]
        } else {
            self.x0.clone()
        }
    }

    /// Number of Brownian drivers.
    fn drivers(&self) -> usize {
        match &self.kind {
            GeneratorKind::ItoEuler { vol, .. } => vol.first().map_or(0, Vec::len),
            _ => self.dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.dim == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.level < 1 || self.level > 30 {
            return bad(format!("grid level must lie in 1..=30, got {}", self.level));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if !self.x0.is_empty() && self.x0.len() != self.dim {
            return bad(format!("x0 has {} entries for dimension {}", self.x0.len(), self.dim));
        }
        if self.x0.iter().any(|x| !x.is_finite()) {
            return bad("x0 must be finite".into());
        }
        match &self.kind {
            GeneratorKind::Brownian => {}
            GeneratorKind::ItoEuler { drift, vol } => {
                if drift.len() != self.dim || vol.len() != self.dim {
                    return bad(format!("drift and vol need {} rows", self.dim));
                }
                let m = self.drivers();
                if m == 0 || vol.iter().any(|row| row.len() != m) {
                    return bad("vol rows must have the same positive length".into());
                }
                for f in drift.iter().chain(vol.iter().flatten()) {
                    require_causal(f, self.dim, self.horizon)?;
                }
            }
            GeneratorKind::LocalVol { vol } => {
                if vol.len() != self.dim {
                    return bad(format!("local vol needs {} functions", self.dim));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Partition> {
        Partition::dyadic(self.horizon, self.level)
    }
}

fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Path number `index` of the ensemble described by `spec`.
pub fn generate(spec: &GeneratorSpec, index: u64) -> Result<CadlagPath> {
    spec.validate()?;
    generate_unchecked(spec, index)
}

fn generate_unchecked(spec: &GeneratorSpec, index: u64) -> Result<CadlagPath> {
    let grid = spec.grid()?;
    let times = grid.times().to_vec();
    let d = spec.dim;
    let m = spec.drivers();
    let mut rng = rng_for(spec.seed, index);
    let mut noise = vec![0.0; m];
    let mut path = CadlagPath::new(grid, spec.start().repeat(times.len()), d)?;
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        let sqrt_dt = dt.sqrt();
        for w in noise.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *w = sqrt_dt * z;
        }
        let incr: Vec<f64> = match &spec.kind {
            GeneratorKind::Brownian => noise.clone(),
            GeneratorKind::LocalVol { vol } => {
                let prev = path.knot(k - 1);
                (0..d).map(|i| vol[i](times[k - 1], prev[i]) * noise[i]).collect()
            }
            GeneratorKind::ItoEuler { drift, vol } => {
                // coefficients only read knots ≤ t_{k-1}, which are final
                let t = times[k - 1];
                let mut incr = Vec::with_capacity(d);
                for i in 0..d {
                    let mut v = drift[i].eval(t, &path)? * dt;
                    for (j, w) in noise.iter().enumerate() {
                        v += vol[i][j].eval(t, &path)? * w;
                    }
                    incr.push(v);
                }
                incr
            }
        };
        let values = path.values_mut();
        for i in 0..d {
            values[k * d + i] = values[(k - 1) * d + i] + incr[i];
        }
    }
    Ok(path)
}

/// Brownian path number 0 of `spec` (any kind field is ignored).
pub fn brownian_path(spec: &GeneratorSpec) -> Result<CadlagPath> {
    generate(&spec.clone().with_kind(GeneratorKind::Brownian), 0)
}

/// Euler path number 0 for drift `mu` (one per coordinate) and volatility
/// matrix `sigma`.
pub fn ito_euler(
    mu: Vec<CausalFunctional>,
    sigma: Vec<Vec<CausalFunctional>>,
    spec: &GeneratorSpec,
) -> Result<CadlagPath> {
    generate(&spec.clone().with_kind(GeneratorKind::ItoEuler { drift: mu, vol: sigma }), 0)
}

/// Paths `0..size`, generated in parallel and returned in index order.
pub fn ensemble(spec: &GeneratorSpec, size: usize) -> Result<Vec<CadlagPath>> {
    spec.validate()?;
    (0..size as u64).into_par_iter().map(|i| generate_unchecked(spec, i)).collect()
}
