//! Experiment harness for the `d2dcomp` engine: JSON configs, parameter
//! sweeps, figure recipes and CSV output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod recipes;

pub use config::{validate_config, ExperimentConfig, Violation};
pub use experiment::{run, ResultRow};
