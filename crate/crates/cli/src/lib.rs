//! Scenario runner and oracle self-test for `ptk-core`.

pub mod app;
pub mod expr;
pub mod run;
pub mod scenario;
pub mod selftest;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent input; exit code 2.
    #[error("invalid scenario: {0}")]
    Validation(String),
    /// A library operation failed; exit code 1.
    #[error("numerical failure: {0}")]
    Numerical(#[from] ptk_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}
