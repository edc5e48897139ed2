use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI command, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file {}", .0.display())]
    Missing(PathBuf),

    #[error("malformed field file {}: {reason}", path.display())]
    Field { path: PathBuf, reason: String },

    #[error("malformed JSON in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("solver failed: {0}")]
    Solve(prescurv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solve(_) => exit::NOT_CONVERGED,
            _ => exit::USAGE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::Missing(path)
        } else {
            CliError::Io { path, source }
        }
    }
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
    pub const ESTIMATE_VIOLATION: i32 = 4;
}

pub type CliResult<T> = Result<T, CliError>;
