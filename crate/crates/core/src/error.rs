use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the unfolding toolkit.
#[derive(Debug, Error)]
pub enum UnfoldError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid energy grid: {0}")]
    InvalidGrid(String),

    #[error("invalid {what} at index {index}: {value}")]
    InvalidValue {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("response matrix {axis} {index} has no positive entry")]
    Unconstrained { axis: &'static str, index: usize },

    #[error("{what} needs at least {needed} entries, found {found}")]
    TooShort {
        what: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("{0} requires a population context")]
    MissingContext(&'static str),

    #[error("non-finite value in {term}: {value}")]
    NonFinite { term: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

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

impl UnfoldError {
    /// True for errors caused by malformed input rather than by a failing run.
    pub fn is_validation(&self) -> bool {
        !matches!(self, UnfoldError::Io { .. } | UnfoldError::NonFinite { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        UnfoldError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = UnfoldError> = std::result::Result<T, E>;
