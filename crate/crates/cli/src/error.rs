//! CLI error classes, one per exit code.

use std::fmt;

/// Errors surfaced to the user, classified by exit code: configuration
/// and input-data problems (2), simulation/runtime failures (3), and
/// operating-system I/O failures (4).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad configuration or malformed input data.
    Config(String),
    /// The simulation or analysis itself failed.
    Runtime(String),
    /// Reading or writing a file failed.
    Io(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    /// Wraps a library error arising while running a simulation or an
    /// estimator (as opposed to while validating configuration).
    pub fn runtime(err: pairsim_core::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}
