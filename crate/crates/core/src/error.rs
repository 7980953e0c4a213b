//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition (shape mismatch, bad
    /// hyperparameter, unregistered gradient target, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation produced or encountered a non-finite or otherwise
    /// unusable numeric result (singular system, NaN, overflow).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An operation was requested that the backing object cannot perform,
    /// e.g. gradients from a prediction-only teacher.
    #[error("capability error: {0}")]
    Capability(String),

    /// A file did not conform to its expected format. Carries the location.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
