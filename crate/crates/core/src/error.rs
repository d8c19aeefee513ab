use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("weight function is not symmetric at t={t}: m(t)={left}, m(1-t)={right}")]
    AsymmetricWeight { t: f64, left: f64, right: f64 },

    #[error("weight function is not positive at t={t}: m(t)={value}")]
    NonPositiveWeight { t: f64, value: f64 },

    #[error("derivative is not positive at t={t}: f'(t)={value}")]
    NonPositiveDerivative { t: f64, value: f64 },

    #[error("f(p) <= g(p) at {} grid point(s), first few: {:?}", .violations.len(), &.violations[..violations.len().min(8)])]
    ScoreOrdering { violations: Vec<f64> },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
