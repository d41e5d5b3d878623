use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the harness can report. Each variant maps to a process exit
/// code through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: row {row}: {message}")]
    Parse { path: String, row: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("class id {class} is outside the {space} vocabulary of {count} classes")]
    Vocabulary { class: u32, space: String, count: u32 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// 0 success, 1 usage, 2 data/validation, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::Vocabulary { .. }
            | Error::Argument(_)
            | Error::Alignment(_)
            | Error::Io { .. } => 2,
            Error::Internal(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl AsRef<std::path::Path>, row: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            row,
            message: message.into(),
        }
    }
}
