//! Experiment harness: configuration files, grid execution, CSV output.

mod config;
mod experiments;

pub use config::{
    parse_config, parse_config_str, ExperimentConfig, ExperimentKind, HarnessError, HarnessResult,
};
pub use experiments::{run_experiment, Report};
