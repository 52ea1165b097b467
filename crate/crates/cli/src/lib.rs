//! Config-driven front end for the `entlink` library.

pub mod commands;
pub mod config;

/// Failure classes with stable process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    NoCorrelation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::NoCorrelation(_) => 4,
        }
    }
}

impl From<entlink::Error> for CliError {
    fn from(e: entlink::Error) -> Self {
        match e {
            entlink::Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
            entlink::Error::NoCorrelation { .. } => CliError::NoCorrelation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
