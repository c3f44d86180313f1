use std::fmt;

use equiproj::Error;

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    Violation(String),
    Input(String),
    Math(String),
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Violation(_) => 1,
            CliError::Input(_) => 2,
            CliError::Math(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Violation(m) => write!(f, "bound violation: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Math(m) => write!(f, "numerical error: {m}"),
            CliError::Diverged(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidArgument(_) | Error::Format(_) | Error::Io(_) => CliError::Input(msg),
            Error::BoundViolation(_) => CliError::Violation(msg),
            Error::TrainingDiverged { .. } => CliError::Diverged(msg),
            Error::ConvergenceFailure { .. }
            | Error::RankDeficient { .. }
            | Error::Capacity(_)
            | Error::Evaluation { .. } => CliError::Math(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
