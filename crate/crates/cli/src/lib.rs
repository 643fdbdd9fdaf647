//! Command-line experiments for robust mean-variance frontiers.
//!
//! The binary `robust-frontier` is a thin wrapper over [`commands::execute`].

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod ingest;
pub mod output;
pub mod suites;

pub use commands::{execute, Command, Invocation};
pub use config::Config;
pub use error::{CliError, CliResult};
pub use experiments::ExperimentKind;
