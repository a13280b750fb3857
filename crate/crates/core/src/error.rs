use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite function value at coordinate {coord} (offset {offset:+e})")]
    NonFinite { coord: usize, offset: f64 },

    #[error("expected {expected} tokens, got {found}")]
    Encoding { expected: String, found: String },

    #[error("model family `{family}` requires real-valued tokens")]
    ComplexTokens { family: &'static str },

    #[error("training diverged at epoch {epoch} (loss {loss:e})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence: {0}")]
    NotConverged(String),

    #[error("unknown parameter group `{0}`")]
    UnknownParam(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
