use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("item index {index} outside vocabulary of size {size}")]
    Vocabulary { index: usize, size: usize },

    #[error("unknown item `{0}`")]
    UnknownItem(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("batch has no unmasked positions")]
    DegenerateBatch,

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("gradient check failed: {0}")]
    Check(String),

    #[error("recall of the baseline is zero; uplift is undefined")]
    UndefinedUplift,

    #[error("malformed container {path}: {message}")]
    Format { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    /// Whether the failure stems from the caller's inputs or configuration
    /// rather than from a numeric or runtime fault.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Usage(_)
                | Error::Parse { .. }
                | Error::Ingest(_)
                | Error::Io { .. }
                | Error::Format { .. }
                | Error::UnknownItem(_)
                | Error::Vocabulary { .. }
                | Error::UndefinedUplift
        )
    }
}
