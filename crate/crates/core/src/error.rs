use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value or grid violates a documented invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad field format: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: truncated field file (expected {expected} bytes, found {found})")]
    Length {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("index {index} outside basis cutoff {n_max}")]
    IndexOutOfRange { index: i64, n_max: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("amplitude not normalized: norm^2 = {0}")]
    NotNormalized(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("coefficient matrix is not Hermitian (residual {0:e})")]
    NonHermitian(f64),

    #[error("numerical divergence at t = {time}: {detail}")]
    Divergence { time: f64, detail: String },

    #[error("trajectories diverged for samples {indices:?}")]
    EnsembleDivergence { indices: Vec<usize> },

    #[error("momentum domain too small: {0}")]
    DomainTooSmall(String),

    #[error("too many samples outside the grid ({fraction:.3} of mass)")]
    OutOfBounds { fraction: f64 },

    #[error("eigen-iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("config: {0}")]
    Config(String),

    /// An error raised inside a named stage of an experiment pipeline.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a stage name, keeping the inner exit code.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Config(_) | Error::Validation(_) | Error::IndexOutOfRange { .. } => 2,
            Error::GridMismatch(_) | Error::NotNormalized(_) | Error::DomainTooSmall(_) => 2,
            Error::Io { .. } | Error::Format { .. } | Error::Length { .. } => 4,
            _ => 3,
        }
    }
}
