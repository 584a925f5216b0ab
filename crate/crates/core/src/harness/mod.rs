//! Experiment configuration, orchestration and CSV export.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod export;
pub mod selftest;

pub use config::{ExperimentConfig, Overrides, RunConfig};
pub use experiment::{run_evaluation, run_sweep, run_training, SweepParam};
