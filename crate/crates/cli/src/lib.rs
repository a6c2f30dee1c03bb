//! The `bkcalc` experiment runner.

pub mod config;
pub mod error;
pub mod registry;
pub mod run;

pub use config::{ExperimentConfig, Overrides};
pub use error::CliError;
pub use run::{run, Subcommand};
