//! CLI error type carrying the exit-code contract: 2 for configuration
//! problems, 3 for data problems, 4 for numerical failures.

use clborrow_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numerical(_) => "numerical",
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Config(msg) => CliError::Config(format!("invalid configuration: {msg}")),
            CoreError::Data(msg) => CliError::Data(format!("invalid data: {msg}")),
            CoreError::Numerical(msg) => CliError::Numerical(format!("numerical failure: {msg}")),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
