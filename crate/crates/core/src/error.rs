use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the model stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate component: rejection sampler exceeded {0} draws without a point above ground")]
    DegenerateComponent(usize),

    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(String),

    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    #[error("every component fell below the prune threshold {0}")]
    PruneEverything(f64),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("insufficient sample: {found} qualifying players, need at least {needed}")]
    InsufficientSample { found: usize, needed: usize },

    #[error("model hash mismatch: expected {expected}, found {found}")]
    ModelHashMismatch { expected: String, found: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format { path: path.into(), message: message.to_string() }
    }
}
