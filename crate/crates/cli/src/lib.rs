//! File formats and command implementations behind the `rimu-opt` binary.
//!
//! Exit codes: 0 success, 1 input, validation or solver error, 2 solve
//! stopped before convergence (outputs are still written).

use std::fmt;

pub mod commands;
pub mod files;

pub use commands::{run, Cli, Command};

/// An error reported to the user, exit code 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Successful command outcome mapped onto the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    NotConverged,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::NotConverged => 2,
        }
    }
}
