use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {field}: {message}")]
    Config { field: String, message: String },
    #[error("all {0} sweep points failed")]
    AllPointsFailed(usize),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Core(#[from] imdd_core::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::AllPointsFailed(_) => 3,
            CliError::Solver(_) => 4,
            CliError::Core(_) | CliError::Io { .. } => 1,
        }
    }
}
