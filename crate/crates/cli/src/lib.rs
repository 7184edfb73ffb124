//! Harness behind the `qot` binary: configuration, table and figure
//! regeneration, and Monte Carlo experiments.

pub mod checks;
pub mod config;
pub mod figures;
pub mod format;
pub mod simulate;
pub mod stats;
pub mod table;

pub use config::{ExperimentConfig, UsageError};
