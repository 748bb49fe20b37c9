use std::fmt::Display;

pub const VERIFY_FAILED: u8 = 1;
pub const USAGE: u8 = 2;
pub const ENVIRONMENT: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
    /// The report was already printed.
    pub quiet: bool,
}

impl CliError {
    pub fn verify(msg: impl Display) -> Self {
        CliError {
            code: VERIFY_FAILED,
            message: msg.to_string(),
            quiet: false,
        }
    }

    pub fn usage(msg: impl Display) -> Self {
        CliError {
            code: USAGE,
            message: msg.to_string(),
            quiet: false,
        }
    }

    pub fn env(msg: impl Display) -> Self {
        CliError {
            code: ENVIRONMENT,
            message: msg.to_string(),
            quiet: false,
        }
    }

    /// Verification failed and the report has been printed.
    pub fn reported() -> Self {
        CliError {
            code: VERIFY_FAILED,
            message: String::new(),
            quiet: true,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::env(e)
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
