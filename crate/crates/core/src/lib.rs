//! Pathwise stochastic calculus on step paths.
//!
//! * [`path`]: partitions, càdlàg step paths, stopping and bumping.
//! * [`functional`]: causal functionals and their time/space derivatives.
//! * [`bk`]: the Bichteler–Karandikar pathwise Itô integral, quadratic
//!   variation and the functionals built on them.
//! * [`simulate`]: seeded generators of continuous semimartingale paths.
//! * [`ito_verify`]: numerical checks of the functional Itô formula.

pub mod bk;
pub mod error;
pub mod functional;
pub mod io;
pub mod ito_verify;
pub mod path;
pub mod simulate;

pub use bk::{BkConfig, BkResult, StoppingGrid};
pub use error::{Error, Result};
pub use functional::{CausalFunctional, DerivativeBundle, Functional};
pub use ito_verify::{ConvergenceReport, ItoReport};
pub use path::{Bracket, CadlagPath, LeftLimit, Partition};
pub use simulate::{GeneratorKind, GeneratorSpec};
