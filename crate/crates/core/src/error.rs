use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} outside the path domain [0, {horizon}]")]
    Domain { t: f64, horizon: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coordinate {index} out of range for dimension {dim}")]
    Coordinate { index: usize, dim: usize },

    #[error("finite-difference step must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("cannot combine an empty list of functionals")]
    EmptyCombination,

    #[error("functional `{0}` is not causal")]
    NonCausal(String),

    #[error("functional `{0}` has no analytic derivative bundle")]
    MissingBundle(String),

    #[error("paths with a finite lifetime are not supported here")]
    FiniteLifetime,

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed path file: {0}")]
    PathFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
