//! File formats, configuration, synthetic data and reports around the
//! forecasting core.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod report;
pub mod snapshot;
pub mod synthetic;

pub use error::{AppError, Result};
