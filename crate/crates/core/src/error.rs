use thiserror::Error;

use crate::graph::{ProcessId, Round};

/// Errors produced by the simulator, the adversary generators and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("generation failed after {attempts} attempts: {constraint}")]
    Generation { constraint: String, attempts: usize },

    #[error("execution failed in round {round} at process {pid}: {message}")]
    Execution {
        round: Round,
        pid: ProcessId,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(message: impl Into<String>) -> Error {
    Error::InvalidArgument(message.into())
}
