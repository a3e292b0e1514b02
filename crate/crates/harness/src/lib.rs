//! Experiment harness for the shuffle-model vector summation protocol:
//! dataset ingestion, configuration, seeded sweeps and CSV artifacts.

pub mod config;
pub mod dataset;
mod error;
pub mod output;
pub mod sweep;

pub use error::{HarnessError, Result};
