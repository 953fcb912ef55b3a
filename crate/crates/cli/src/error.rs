use std::fmt;
use std::process::ExitCode;

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Exit 1.
    Internal(String),
    /// A verification ran and did not pass. Exit 1.
    VerifyFailed,
    /// Unreadable or malformed configuration or arguments. Exit 2.
    Config(String),
    /// Mixture or construction violates its constraints. Exit 2.
    Validation(String),
    /// Decoherence function could not be evaluated. Exit 3.
    Evaluation(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Internal(_) | CliError::VerifyFailed => 1,
            CliError::Config(_) | CliError::Validation(_) => 2,
            CliError::Evaluation(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Internal(m) => write!(f, "internal error: {m}"),
            CliError::VerifyFailed => write!(f, "verification failed"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Evaluation(m) => write!(f, "evaluation error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
