use chiral_ring::Error;
use thiserror::Error;

/// Exit codes: 0 success, 2 configuration or input error, 3 solver error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("solver error: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::ConfigError(_)
            | Error::TooManySites { .. }
            | Error::AxisMismatch(_)
            | Error::IndexOutOfRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}
