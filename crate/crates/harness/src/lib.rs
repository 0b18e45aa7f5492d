//! Experiment harness for the residual-informed loss toolkit: TOML run
//! configuration, the data-to-metrics pipeline, multi-run studies and the
//! Friedman / Nemenyi statistics.

pub mod commands;
pub mod config;
pub mod error;
pub mod friedman;
pub mod output;
pub mod pipeline;

pub use commands::{apply_overrides, run, Command, Overrides, RunReport};
pub use config::RunConfig;
pub use error::{HarnessError, Result};
