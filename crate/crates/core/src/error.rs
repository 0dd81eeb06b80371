use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("region too small: {0}")]
    InsufficientRegion(String),
    #[error("site {0} lies outside the region")]
    OutOfRegion(String),
    #[error("region has zero area")]
    EmptyRegion,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid bandwidth schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("invalid threshold {0}: must lie in (0, 1]")]
    InvalidThreshold(f64),
    #[error("need at least {needed} replicates, got {got}")]
    InsufficientReplicates { needed: usize, got: usize },
    #[error("need at least {needed} sample sizes, got {got}")]
    InsufficientSizes { needed: usize, got: usize },
    #[error("covariance matrix is singular beyond ridge repair")]
    SingularCovariance,
    #[error("no signal: selected dimension is 0")]
    NoSignal,
    #[error("subspace undefined for a zero matrix")]
    UndefinedSubspace,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularCovariance | Error::NoSignal | Error::UndefinedSubspace
        )
    }

    /// Process exit code used by the CLI: 2 for validation errors, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }
}
