//! Experiment orchestration for `carlab-core`: configuration, output
//! directories, reports and the `carlab` subcommands.

pub mod checks;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{parse_config, ExperimentConfig};
pub use error::LabError;
