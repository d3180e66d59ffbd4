//! Experiment runner for the Simba optimizer: TOML configs, CSV traces,
//! summary tables, rate certificates and SVG plots.

pub mod config;
pub mod error;
pub mod plot;
pub mod runner;
pub mod summary;
pub mod trace;
pub mod verify;

pub use config::{ExperimentConfig, Overrides};
pub use error::{BenchError, Result};
