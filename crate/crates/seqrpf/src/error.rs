use std::fmt;

use seqrpf_core::Error;

/// Failure of a run, split by the phase that produced it.
#[derive(Debug)]
pub enum RunError {
    /// Bad config or preconditions, found before computing (exit 2).
    Validation(String),
    /// Numerical failure during the run (exit 3).
    Runtime(String),
    Io(std::io::Error),
}

impl RunError {
    pub fn validation(msg: impl Into<String>) -> Self {
        RunError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        RunError::Runtime(msg.into())
    }

    /// Core errors raised while building stages count as validation.
    pub fn setup(e: Error) -> Self {
        RunError::Validation(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Runtime(_) | RunError::Io(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Validation(m) => write!(f, "validation failed: {m}"),
            RunError::Runtime(m) => write!(f, "run failed: {m}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Runtime(format!("serialization: {e}"))
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Runtime(format!("csv: {e}"))
    }
}
