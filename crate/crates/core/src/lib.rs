//! Online probabilistic forecasting of operational times in industrial
//! processes.
//!
//! The engine is an input-output hidden Markov model. Hidden operating modes
//! are discovered by clustering efficiency indicators, their initial and
//! transition distributions are Dirichlet pseudo-count tables keyed by a
//! binary covariate pattern, and the continuous responses are tracked by two
//! forgetting-factor recursive estimators whose forecasts are merged with
//! minimum-variance weights.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, simulation and
//! the command line live in the `opforecast` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod benchmarks;
pub mod clustering;
pub mod dirichlet;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod features;
pub mod iohmm;
pub mod linalg;
pub mod metrics;
pub mod record;
pub mod sequence;
pub mod timeloss;

pub use error::{Error, ErrorKind, Result};
pub use linalg::Matrix;
