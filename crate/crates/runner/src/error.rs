//! Runner-level errors and their process exit codes.

use std::path::PathBuf;

/// Everything that can go wrong between a scenario file and a finished
/// run, partitioned by how the process should exit.
#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    /// The input document is not parseable as a scenario.
    #[error("parse error: {0}")]
    Parse(String),

    /// A semantic error raised by the core library.
    #[error(transparent)]
    Core(#[from] rlvrsim_core::Error),

    /// The document parsed but its values are rejected.
    #[error("validation error: {0}")]
    Validation(String),

    /// A run completed but an expectation or invariant check failed.
    #[error("expectation failed: {0}")]
    Expectation(String),

    /// A requested name is not registered; the message lists what is.
    #[error("{0}")]
    NotFound(String),

    /// A file could not be read or written.
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunnerError {
    /// Process exit code: 1 validation/parse, 2 expectation failure,
    /// 3 I/O (0 is success and never constructed here).
    pub fn exit_code(&self) -> u8 {
        match self {
            RunnerError::Parse(_)
            | RunnerError::Core(_)
            | RunnerError::Validation(_)
            | RunnerError::NotFound(_) => 1,
            RunnerError::Expectation(_) => 2,
            RunnerError::Io { .. } => 3,
        }
    }

    /// Wraps an I/O failure with the path it happened on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunnerError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, RunnerError>;
