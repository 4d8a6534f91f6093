use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = LpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numeric range error: {0}")]
    NumericRange(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed index container: {0}")]
    Format(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LpError {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        LpError::Usage(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        LpError::NumericRange(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LpError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class: 2 usage, 3 I/O, 4 numeric range.
    pub fn exit_code(&self) -> i32 {
        match self {
            LpError::DimensionMismatch { .. } | LpError::Usage(_) | LpError::Parse { .. } => 2,
            LpError::Io { .. } | LpError::Format(_) => 3,
            LpError::NumericRange(_) => 4,
        }
    }
}
