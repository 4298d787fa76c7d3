use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
///
/// `Validation` covers bad inputs (malformed files, out-of-range
/// parameters); everything else is an internal failure. The CLI maps the
/// two groups onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user-supplied input rather than a bug.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// A skipped input line, reported rather than aborting the run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

