//! Problem files and subcommands of the `wicklab` binary.

pub mod commands;
pub mod problem;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] wicklab::Error),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("invalid problem file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

pub use commands::{Outcome, Settings};
pub use problem::{BackendChoice, Problem};
