//! Configuration-driven experiment runner for the `vardiff` samplers.

pub mod config;
pub mod error;
pub mod experiment;

pub use config::{ExperimentConfig, Mode, Observable};
pub use error::{HarnessError, Result};
pub use experiment::{read_records, run_experiment, run_reference, write_outputs, ExperimentOutput, Reference};
