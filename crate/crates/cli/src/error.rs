use std::fmt;

use saddlekit::Error;

/// Errors surfaced by the command line, each with its exit code.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(Error),
    /// A `--verify exhaustive` recheck disagreed with a reported result.
    Verify(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Core(Error::Input(_) | Error::Metric(_)) => 1,
            CliError::Core(Error::Precondition(_)) => 2,
            CliError::Core(Error::Verification(_)) | CliError::Verify(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Core(Error::Precondition(m)) => write!(f, "precondition not met: {m}"),
            CliError::Core(Error::Verification(m)) => {
                write!(f, "internal verification failed: {m}")
            }
            CliError::Core(e) => write!(f, "input error: {e}"),
            CliError::Verify(m) => write!(f, "exhaustive verification failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}
