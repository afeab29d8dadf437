//! Configuration, orchestration and file output for `nematic-core` runs.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, RunError};
