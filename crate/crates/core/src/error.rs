use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("activation cache does not belong to the current network parameters")]
    StaleCache,

    #[error("episode already terminated")]
    EpisodeTerminated,

    #[error("insufficient data: need {needed} transitions, buffer holds {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("unknown config key(s): {0}")]
    ConfigUnknownKey(String),

    #[error("invalid config value: {0}")]
    ConfigInvalid(String),

    #[error("{path}: {message}")]
    Log { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn log(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Log {
            path: path.into(),
            message: message.into(),
        }
    }
}
