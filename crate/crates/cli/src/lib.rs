//! File formats and subcommands of the `staticext` driver.

pub mod bdfile;
pub mod commands;
pub mod manifest;
pub mod solfile;

/// A malformed input file, with the 1-based line of the problem.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Malformed input, unreadable file or invalid options.
    pub const INPUT: i32 = 1;
    pub const DIVERGED: i32 = 2;
    /// A verification (static check, kernel pattern, finite differences) failed.
    pub const VERIFY: i32 = 3;
    pub const NOT_SYMMETRIC: i32 = 4;
    pub const MASS_SPREAD: i32 = 5;
}
