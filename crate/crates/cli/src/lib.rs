//! Experiment harness behind the `cna` binary: configs, training runs,
//! suites, landscapes and correlation reports.

pub mod config;
pub mod csvio;
pub mod error;
pub mod experiment;
pub mod fsutil;
pub mod landscape;
pub mod report;
pub mod suite;
pub mod svg;

pub use error::{CliError, Result};
