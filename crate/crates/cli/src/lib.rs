//! Configuration, orchestration and output for the `dervalue` command.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

pub use commands::{run, Command, Report};
pub use config::{Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration")]
    Config(Vec<(String, String)>),
    #[error("{0}")]
    Data(dervalue_core::Error),
    #[error("{0}")]
    Solver(dervalue_core::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Data(_) => 2,
            RunError::Solver(_) => 3,
        }
    }

    pub fn config(path: &str, msg: impl Into<String>) -> Self {
        RunError::Config(vec![(path.to_string(), msg.into())])
    }
}

impl From<dervalue_core::Error> for RunError {
    fn from(e: dervalue_core::Error) -> Self {
        match e {
            dervalue_core::Error::Solver { .. } => RunError::Solver(e),
            other => RunError::Data(other),
        }
    }
}
