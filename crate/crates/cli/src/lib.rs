//! Configuration, orchestration and file formats for the `nsul` runner.

pub mod config;
pub mod experiment;
pub mod ladder;
pub mod snapshot;
pub mod table;

pub use config::{ConfigError, ExperimentConfig};
