//! Experiment runner and command-line harness for `gsp-core`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod runner;
pub mod schema;
pub mod summary;
pub mod table;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use runner::{run, write_outputs, RunOutput};
