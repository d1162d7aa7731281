//! Experiment harness around `fifa-core`: configured runs, margin sweeps,
//! Pareto frontiers and a few diagnostic reports. The `fifa` binary is a thin
//! argument parser over this library.

pub mod config;
pub mod error;
pub mod experiment;
pub mod pareto;
pub mod reports;
pub mod sweep;

pub use config::{Algorithm, ExperimentConfig, Selection, Strategy, SweepConfig};
pub use error::{CliError, Result};
pub use experiment::{run, run_prepared, PreparedData, RunRecord};
pub use pareto::pareto;
pub use sweep::{sweep, sweep_prepared, SweepOutcome};
