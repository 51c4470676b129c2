use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, malformed or outside its allowed range.
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    /// A physical input lies outside the domain of the model.
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller violated an operation's precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A metric is undefined for the given data (e.g. zero total transmission).
    #[error("undefined metric: {0}")]
    Undefined(String),

    #[error("optimizer did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Json(_) | Error::Precondition(_) => 3,
            Error::Domain(_) | Error::Undefined(_) => 4,
            Error::Io { .. } | Error::Data { .. } => 5,
            Error::NotConverged { .. } => 6,
        }
    }
}
