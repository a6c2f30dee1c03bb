//! Experiment configuration: a TOML file with `[generator]`, `[bk]`,
//! `[functional]` and `[run]` sections. Every field has a default, and the
//! fully resolved config is echoed into `meta.txt`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bkcalc_core::BkConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Required by every subcommand that simulates.
    pub seed: Option<u64>,
    /// Not echoed into `meta.txt`, so identical runs in different places
    /// produce identical files.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 lets rayon decide. Not echoed either.
    #[serde(skip_serializing)]
    pub threads: usize,
    pub generator: GeneratorConfig,
    pub bk: BkSection,
    pub functional: FunctionalConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// `brownian`, `ito_euler` or `local_vol`.
    pub kind: String,
    pub dim: usize,
    pub horizon: f64,
    pub level: u32,
    pub ensemble: usize,
    pub x0: Vec<f64>,
    /// Constant drift for `ito_euler`.
    pub mu: f64,
    /// Volatility scale for `ito_euler` and `local_vol`.
    pub sigma: f64,
    /// `ito_euler` only: `σ(t, ω) = sigma · ω(t)` per coordinate.
    pub geometric: bool,
    /// `local_vol` only: `σ(t, x) = sigma · |x|^beta`.
    pub beta: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            kind: "brownian".into(),
            dim: 1,
            horizon: 1.0,
            level: 12,
            ensemble: 8,
            x0: Vec::new(),
            mu: 0.0,
            sigma: 1.0,
            geometric: false,
            beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BkSection {
    pub max_level: u32,
    pub cauchy_tol: f64,
    pub strict: bool,
    pub early_stop: bool,
}

impl Default for BkSection {
    fn default() -> Self {
        let d = BkConfig::default();
        Self { max_level: d.max_level, cauchy_tol: d.cauchy_tol, strict: d.strict, early_stop: d.early_stop }
    }
}

impl BkSection {
    pub fn to_core(&self) -> BkConfig {
        BkConfig {
            max_level: self.max_level,
            cauchy_tol: self.cauchy_tol,
            horizon: None,
            strict: self.strict,
            early_stop: self.early_stop,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionalConfig {
    /// A registered built-in, see [`crate::registry::NAMES`].
    pub name: String,
    pub i: usize,
    pub j: usize,
    /// Parameter of `constant`, drift of `ito_process`.
    pub value: f64,
    /// Volatility of `ito_process`.
    pub sigma: f64,
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        Self { name: "square".into(), i: 0, j: 0, value: 1.0, sigma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub levels: Vec<u32>,
    /// Input path CSV for `integrate`, `qv` and `derive`; path 0 of the
    /// generator when absent.
    pub input: Option<PathBuf>,
    /// Integrand of `integrate`, a registered functional evaluated along the path.
    pub integrand: String,
    /// Integrator coordinate of `integrate`.
    pub coordinate: usize,
    pub threshold: f64,
    /// Quantiles summarizing each level of a convergence report.
    pub quantiles: [f64; 2],
    pub probe_times: Vec<f64>,
    pub h_time: Option<f64>,
    pub h_space: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            levels: vec![6, 8, 10],
            input: None,
            integrand: "coordinate".into(),
            coordinate: 0,
            threshold: 0.1,
            quantiles: [0.5, 0.9],
            probe_times: Vec::new(),
            h_time: None,
            h_space: None,
        }
    }
}

impl RunConfig {
    pub fn quantiles(&self) -> (f64, f64) {
        (self.quantiles[0], self.quantiles[1])
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub strict_bk: bool,
    pub levels: Option<Vec<u32>>,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads `file`; relative `run.input` paths resolve against its directory.
    pub fn load(file: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(file)
            .map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(input), Some(dir)) = (&cfg.run.input, file.parent()) {
            if input.is_relative() {
                cfg.run.input = Some(dir.join(input));
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        if o.strict_bk {
            self.bk.strict = true;
        }
        if let Some(levels) = &o.levels {
            self.run.levels = levels.clone();
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("a seed is required (config `seed` or --seed)".into()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// `"6,8,10"` → `[6, 8, 10]`.
pub fn parse_levels(s: &str) -> Result<Vec<u32>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| format!("bad level `{p}`: {e}")))
        .collect()
}
