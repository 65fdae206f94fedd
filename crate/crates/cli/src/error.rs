use thiserror::Error;

/// Failures of a command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hke_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    /// Some verification criteria did not pass.
    #[error("{failed} of {total} criteria failed")]
    CriteriaFailed { failed: usize, total: usize },
}

impl CliError {
    /// 1 for failed criteria, 2 for configuration and numerical errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CriteriaFailed { .. } => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
