use std::path::{Path, PathBuf};

use nutriplan_core::config::ConfigError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{failed} of {total} patient(s) failed")]
    PatientFailures { failed: usize, total: usize },
    #[error("server error: {0}")]
    Server(String),
}

impl CliError {
    pub fn input(path: &Path, message: impl ToString) -> Self {
        CliError::Input { path: path.to_path_buf(), message: message.to_string() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 2 for configuration and usage problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
