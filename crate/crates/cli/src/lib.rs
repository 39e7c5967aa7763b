//! Scenario runner for clsnet: configuration, command implementations,
//! output writers and the acceptance suite.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
pub mod reference;
pub mod verify;

use clsnet::error::Error;

/// Failure of a command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output error: {0}")]
    Io(String),
    #[error("acceptance failure: {0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    /// Errors that describe an impossible request are config errors; the
    /// rest arise while computing.
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameters(_)
            | Error::SiteOutOfBounds { .. }
            | Error::EntryOutOfBounds { .. }
            | Error::DiagonalFlip(_)
            | Error::InvalidPermutation(_)
            | Error::NotAHub(_)
            | Error::TooFewDimers { .. }
            | Error::NoPath { .. }
            | Error::TimelineConflict(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
