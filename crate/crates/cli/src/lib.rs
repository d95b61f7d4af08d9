//! Command-line front end: synthetic data generation, file ingestion,
//! pipeline orchestration and report emission.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod report;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
