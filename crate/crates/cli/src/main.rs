use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};

use bkcalc_cli::config::parse_levels;
use bkcalc_cli::{run, CliError, ExperimentConfig, Overrides, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "bkcalc", version, about = "Pathwise stochastic calculus experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Return the zero path when the BK levels do not converge, and exit with code 4.
    #[arg(long, global = true)]
    strict_bk: bool,
    /// Comma-separated grid levels, e.g. `6,8,10`.
    #[arg(long, global = true, value_parser = parse_levels)]
    levels: Option<std::vec::Vec<u32>>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(clap::Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate an ensemble of paths.
    Simulate,
    /// BK integral of a functional along a path against one coordinate.
    Integrate,
    /// Quadratic covariations of every coordinate pair.
    Qv,
    /// Functional Itô formula residuals across partition levels.
    ItoCheck,
    /// Analytic and numeric causal derivatives side by side.
    Derive,
    /// Convergence of a functional under piecewise-constant approximation.
    Regularity,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Subcommand::Simulate,
            Command::Integrate => Subcommand::Integrate,
            Command::Qv => Subcommand::Qv,
            Command::ItoCheck => Subcommand::ItoCheck,
            Command::Derive => Subcommand::Derive,
            Command::Regularity => Subcommand::Regularity,
        }
    }
}

fn execute(cli: Cli) -> Result<PathBuf, CliError> {
    let g = cli.global;
    let mut cfg = match &g.config {
        Some(file) => ExperimentConfig::load(file)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides { seed: g.seed, out: g.out, strict_bk: g.strict_bk, levels: g.levels, threads: g.threads });
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    run(cli.command.into(), &cfg)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bkcalc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
