//! File formats, configuration and subcommands for the `dressed-stirap`
//! binary.

pub mod commands;
pub mod config;
pub mod formats;
pub mod parallel;

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("physics constraint violated: {0}")]
    Physics(String),
    #[error("threshold not met: {0}")]
    Threshold(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// 1 for bad input, 2 for physics violations, 3 for an unmet threshold.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Physics(_) => 2,
            CliError::Threshold(_) => 3,
        }
    }
}
