use thiserror::Error;

/// Errors raised across the sampling engine, analysis pipeline and service.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("lifecycle error: {0}")]
    Lifecycle(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("decode failure: {0}")]
    DecodeFailure(String),

    /// No capacity right now; the caller should retry later.
    #[error("retry later: {0}")]
    RetryLater(String),

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("corrupt event log (last valid sequence number: {last_valid:?}): {reason}")]
    CorruptLog {
        last_valid: Option<u64>,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
