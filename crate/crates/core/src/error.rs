use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Argument,
    Data,
    Training,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("degenerate value bounds: min {min} must be strictly below max {max}")]
    DegenerateBounds { min: f64, max: f64 },

    #[error("value {value} lies outside bounds [{min}, {max}]")]
    OutOfBounds { value: f64, min: f64, max: f64 },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(
        "{count} distinct observed values exceed the limit of {limit}; the task looks continuous, bin the labels instead"
    )]
    TooManyDistinctValues { count: usize, limit: usize },

    #[error("predictions do not align with test dyads: {0}")]
    Alignment(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("correction fit failed: design column `{column}` is degenerate")]
    RankDeficient { column: &'static str },

    #[error("malformed {what} file: {message}")]
    Format { what: &'static str, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Argument(_) => ErrorKind::Argument,
            Error::Diverged { .. } | Error::RankDeficient { .. } => ErrorKind::Training,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
