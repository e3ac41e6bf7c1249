//! Config-driven runner for sequential controlled-measurement experiments.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{ExperimentConfig, Format};
pub use error::CliError;
