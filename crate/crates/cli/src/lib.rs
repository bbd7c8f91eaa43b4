//! Configuration, orchestration, CSV persistence and reporting for rpflow
//! experiments.

pub mod app;
pub mod config;
pub mod output;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{Experiment, ExperimentConfig};
pub use run::{execute, Command, RunError, RunManifest};
