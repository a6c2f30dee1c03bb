use bkcalc_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 3,
            Self::NotConverged(_) => 4,
            Self::Failed(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) | Error::PathFormat(_) => Self::Io(e.to_string()),
            Error::InvalidSpec(_)
            | Error::InvalidArgument(_)
            | Error::NonCausal(_)
            | Error::MissingBundle(_)
            | Error::Coordinate { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonPositiveStep(_)
            | Error::InvalidPartition(_) => Self::Config(e.to_string()),
            _ => Self::Failed(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
