use std::path::Path;

use twinbeam_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Domain(_) => 3,
            CliError::Core(CoreError::Truncation { .. }) => 4,
            CliError::Core(_) => 3,
            CliError::CheckFailed(_) => 1,
        }
    }
}
