use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::FieldError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration:\n{}", list(.0))]
    Validation(Vec<FieldError>),

    #[error("solver failure: {0}")]
    Solver(#[from] minmove::Error),
}

fn list(errors: &[FieldError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn field(path: &str, message: impl Into<String>) -> Self {
        CliError::Validation(vec![FieldError {
            path: path.into(),
            message: message.into(),
        }])
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}
