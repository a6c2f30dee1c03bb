//! Subcommand runners. Each run writes `meta.txt`, `paths/` and `results/`
//! under the output directory; all content is a function of the resolved
//! config and input files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde_json::{json, Value};

use bkcalc_core::bk::{bk_integral, quad_variation};
use bkcalc_core::functional::{constant, numeric_bundle, state, CausalFunctional};
use bkcalc_core::io::{read_path_file, write_path_file};
use bkcalc_core::ito_verify::{ito_refinement, ito_residual, regularity_report};
use bkcalc_core::simulate::{ensemble, generate};
use bkcalc_core::{BkConfig, BkResult, CadlagPath, ConvergenceReport, GeneratorKind, GeneratorSpec, Partition};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Integrate,
    Qv,
    ItoCheck,
    Derive,
    Regularity,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Integrate => "integrate",
            Self::Qv => "qv",
            Self::ItoCheck => "ito-check",
            Self::Derive => "derive",
            Self::Regularity => "regularity",
        }
    }
}

struct Output {
    root: PathBuf,
}

impl Output {
    fn create(root: PathBuf) -> Result<Self, CliError> {
        for sub in ["paths", "results"] {
            fs::create_dir_all(root.join(sub)).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        }
        Ok(Self { root })
    }

    fn file(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let p = self.file(rel);
        fs::write(&p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    }

    fn json(&self, rel: &str, v: &Value) -> Result<(), CliError> {
        self.write(rel, format!("{}\n", serde_json::to_string_pretty(v).expect("json serializes")))
    }

    fn path(&self, rel: &str, p: &CadlagPath) -> Result<(), CliError> {
        Ok(write_path_file(p, self.file(rel))?)
    }

    fn csv(&self, rel: &str, fill: impl FnOnce(&mut Vec<u8>) -> bkcalc_core::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(rel, buf)
    }
}

fn generator_spec(cfg: &ExperimentConfig) -> Result<GeneratorSpec, CliError> {
    let g = &cfg.generator;
    let spec = GeneratorSpec::brownian(g.dim, g.horizon, g.level, cfg.require_seed()?).with_x0(g.x0.clone());
    let kind = match g.kind.as_str() {
        "brownian" => GeneratorKind::Brownian,
        "ito_euler" => {
            let d = g.dim;
            let sigma = g.sigma;
            let vol = (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| match (i == j, g.geometric) {
                            (false, _) => constant(0.0),
                            (true, false) => constant(sigma),
                            (true, true) => scaled_coordinate(i, sigma),
                        })
                        .collect()
                })
                .collect();
            GeneratorKind::ItoEuler { drift: (0..d).map(|_| constant(g.mu)).collect(), vol }
        }
        "local_vol" => {
            let (sigma, beta) = (g.sigma, g.beta);
            let f: bkcalc_core::simulate::LocalVolFn = Arc::new(move |_, x: f64| sigma * x.abs().powf(beta));
            GeneratorKind::LocalVol { vol: vec![f; g.dim] }
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown generator kind `{other}`; expected brownian, ito_euler or local_vol"
            )))
        }
    };
    let spec = spec.with_kind(kind);
    spec.validate()?;
    Ok(spec)
}

/// `σ · ω(t)ᵢ`.
fn scaled_coordinate(i: usize, sigma: f64) -> CausalFunctional {
    state(
        move |_, x| sigma * x[i],
        |_, _| 0.0,
        move |_, x| {
            let mut g = nalgebra::DVector::zeros(x.len());
            g[i] = sigma;
            g
        },
        |_, x| DMatrix::zeros(x.len(), x.len()),
    )
}

fn bk_config(cfg: &ExperimentConfig) -> Result<BkConfig, CliError> {
    let bk = cfg.bk.to_core();
    bk.validate()?;
    Ok(bk)
}

fn meta(cmd: Subcommand, cfg: &ExperimentConfig) -> String {
    format!(
        "# bkcalc {} {}\n{}",
        env!("CARGO_PKG_VERSION"),
        cmd.name(),
        cfg.to_toml()
    )
}

/// Runs `cmd`; the output directory defaults to `runs/<subcommand>`.
pub fn run(cmd: Subcommand, cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let root = cfg.out.clone().unwrap_or_else(|| Path::new("runs").join(cmd.name()));
    let out = Output::create(root.clone())?;
    out.write("meta.txt", meta(cmd, cfg))?;
    match cmd {
        Subcommand::Simulate => simulate(cfg, &out),
        Subcommand::Integrate => integrate(cfg, &out),
        Subcommand::Qv => qv(cfg, &out),
        Subcommand::ItoCheck => ito_check(cfg, &out),
        Subcommand::Derive => derive(cfg, &out),
        Subcommand::Regularity => regularity(cfg, &out),
    }?;
    Ok(root)
}

fn simulate(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let spec = generator_spec(cfg)?;
    let paths = ensemble(&spec, cfg.generator.ensemble)?;
    let d = spec.dim;
    let mut terminal = String::from("index");
    for i in 1..=d {
        terminal.push_str(&format!(",x{i}"));
    }
    terminal.push('\n');
    for (k, p) in paths.iter().enumerate() {
        let name = format!("paths/path_{k:04}");
        out.path(&format!("{name}.csv"), p)?;
        out.json(
            &format!("{name}.json"),
            &json!({
                "index": k,
                "seed": spec.seed,
                "stream": k,
                "kind": cfg.generator.kind,
                "dim": d,
                "horizon": spec.horizon,
                "level": spec.level,
                "knots": p.knot_count(),
            }),
        )?;
        let last = p.knot(p.knot_count() - 1);
        terminal.push_str(&k.to_string());
        for v in last {
            terminal.push_str(&format!(",{v}"));
        }
        terminal.push('\n');
    }
    out.write("results/terminal.csv", terminal)
}

/// `run.input`, or path 0 of the generator (written to `paths/input.csv`).
fn input_path(cfg: &ExperimentConfig, out: &Output) -> Result<CadlagPath, CliError> {
    let path = match &cfg.run.input {
        Some(file) => read_path_file(file)?,
        None => generate(&generator_spec(cfg)?, 0)?,
    };
    out.path("paths/input.csv", &path)?;
    Ok(path)
}

fn bk_record(r: &BkResult, cfg: &BkConfig) -> Value {
    json!({
        "converged": r.converged,
        "levels_used": r.levels_used,
        "final_cauchy_gap": r.final_cauchy_gap,
        "cauchy_tol": cfg.cauchy_tol,
        "strict": cfg.strict,
    })
}

fn write_bk(out: &Output, stem: &str, r: &BkResult, cfg: &BkConfig) -> Result<(), CliError> {
    out.path(&format!("results/{stem}.csv"), &r.path)?;
    let mut gaps = String::from("level,gap\n");
    for (k, g) in r.gaps.iter().enumerate() {
        gaps.push_str(&format!("{},{g}\n", k + 1));
    }
    out.write(&format!("results/{stem}_gaps.csv"), gaps)?;
    out.json(&format!("results/{stem}.json"), &bk_record(r, cfg))
}

fn strict_failure(results: &[(&str, &BkResult)], cfg: &BkConfig) -> Result<(), CliError> {
    match results.iter().find(|(_, r)| !r.converged) {
        Some((stem, r)) if cfg.strict => Err(CliError::NotConverged(format!(
            "{stem}: Cauchy gap {} above {} after level {}",
            r.final_cauchy_gap, cfg.cauchy_tol, r.levels_used
        ))),
        _ => Ok(()),
    }
}

fn integrate(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let bk = bk_config(cfg)?;
    let x = input_path(cfg, out)?;
    let z = registry::build(&cfg.functional, Some(&cfg.run.integrand), x.dim(), &bk)?.knot_path(&x)?;
    out.path("results/integrand.csv", &z)?;
    let r = bk_integral(&z, &x, cfg.run.coordinate, &bk)?;
    write_bk(out, "integral", &r, &bk)?;
    strict_failure(&[("integral", &r)], &bk)
}

fn qv(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let bk = bk_config(cfg)?;
    let x = input_path(cfg, out)?;
    let mut results = Vec::new();
    for i in 0..x.dim() {
        for j in i..x.dim() {
            let stem = format!("qv_x{}_x{}", i + 1, j + 1);
            let r = quad_variation(&x, i, j, &bk)?;
            write_bk(out, &stem, &r, &bk)?;
            results.push((stem, r));
        }
    }
    let refs: Vec<(&str, &BkResult)> = results.iter().map(|(s, r)| (s.as_str(), r)).collect();
    strict_failure(&refs, &bk)
}

fn report_record(rep: &ConvergenceReport, horizon: f64) -> Value {
    json!({
        "levels": rep.levels,
        "quantiles": [rep.quantiles.0, rep.quantiles.1],
        "center": rep.center,
        "upper": rep.upper,
        "decreasing": rep.decreasing,
        "threshold": rep.threshold,
        "below_threshold": rep.below_threshold,
        "verdict": rep.verdict(),
        "observed_order": rep.observed_order(horizon),
    })
}

fn write_report(out: &Output, stem: &str, rep: &ConvergenceReport, horizon: f64) -> Result<(), CliError> {
    out.csv(&format!("results/{stem}.csv"), |b| rep.write_csv(b))?;
    out.json(&format!("results/{stem}.json"), &report_record(rep, horizon))
}

fn levels(cfg: &ExperimentConfig) -> &[u32] {
    &cfg.run.levels
}

fn ito_check(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let bk = bk_config(cfg)?;
    let spec = generator_spec(cfg)?;
    let f = registry::build(&cfg.functional, None, spec.dim, &bk)?;
    if !f.has_analytic() {
        return Err(CliError::Config(format!("functional `{}` has no analytic derivative bundle", cfg.functional.name)));
    }
    let rep = ito_refinement(&f, &spec, levels(cfg), cfg.generator.ensemble, &bk, cfg.run.threshold)?
        .requantiled(cfg.run.quantiles());
    write_report(out, "ito_refinement", &rep, spec.horizon)?;

    let path = generate(&spec, 0)?;
    out.path("paths/path_0000.csv", &path)?;
    let finest = *levels(cfg).last().expect("levels validated");
    let pi = Partition::dyadic(spec.horizon, finest)?;
    let trace = ito_residual(&f, &path, &pi, &bk)?;
    out.csv("results/ito_trace.csv", |b| trace.write_trace_csv(b))?;

    if cfg.functional.name == "square" && cfg.generator.kind == "brownian" {
        // d(x²) = 2x dx + dt for a standard Brownian coordinate
        let i = cfg.functional.i;
        let mut csv = String::from("t,lhs,rhs,classical_rhs\n");
        let (mut classical, mut prev) = (0.0, path.eval(0.0)?[i]);
        for (k, &t) in trace.lhs.times().iter().enumerate() {
            let x = path.eval(t)?[i];
            if k > 0 {
                classical += 2.0 * prev * (x - prev);
            }
            prev = x;
            csv.push_str(&format!("{t},{},{},{}\n", trace.lhs.values()[k], trace.rhs.values()[k], classical + t));
        }
        out.write("results/classical_oracle.csv", csv)?;
    }
    Ok(())
}

fn default_probe_times(horizon: f64) -> Vec<f64> {
    (0..8).map(|k| horizon * (k as f64 + 0.5) / 8.0).collect()
}

fn derive(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let bk = bk_config(cfg)?;
    let path = input_path(cfg, out)?;
    let f = registry::build(&cfg.functional, None, path.dim(), &bk)?;
    let d = path.dim();
    let times = match cfg.run.probe_times.as_slice() {
        [] => default_probe_times(path.horizon()),
        t => t.to_vec(),
    };
    let mut header = String::from("t,d0,d0_num");
    for i in 1..=d {
        header.push_str(&format!(",grad{i},grad{i}_num"));
    }
    for i in 1..=d {
        for j in 1..=d {
            header.push_str(&format!(",hess{i}{j},hess{i}{j}_num"));
        }
    }
    header.push_str(",max_gap\n");
    let mut csv = header;
    let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for &t in &times {
        let analytic = f.bundle(t, &path)?;
        let numeric = numeric_bundle(&f, t, &path, cfg.run.h_time, cfg.run.h_space)?;
        let a = analytic.as_ref();
        csv.push_str(&format!("{t},{},{}", cell(a.map(|b| b.d0)), numeric.d0));
        for i in 0..d {
            csv.push_str(&format!(",{},{}", cell(a.map(|b| b.grad[i])), numeric.grad[i]));
        }
        for i in 0..d {
            for j in 0..d {
                csv.push_str(&format!(",{},{}", cell(a.map(|b| b.hess[(i, j)])), numeric.hess[(i, j)]));
            }
        }
        csv.push_str(&format!(",{}\n", cell(a.map(|b| b.max_gap(&numeric)))));
    }
    out.write("results/derivatives.csv", csv)
}

fn regularity(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let bk = bk_config(cfg)?;
    let spec = generator_spec(cfg)?;
    let f = registry::build(&cfg.functional, None, spec.dim, &bk)?;
    let rep = regularity_report(&f, &spec, levels(cfg), cfg.generator.ensemble, cfg.run.threshold)?
        .requantiled(cfg.run.quantiles());
    write_report(out, "regularity", &rep, spec.horizon)
}
