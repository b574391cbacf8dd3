//! Linear ensemble sampling for stochastic linear bandits, with baselines,
//! analysis probes and an experiment runner.

pub mod baselines;
pub mod brownian;
pub mod diagnostics;
pub mod ensemble;
pub mod environment;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod rng;

pub use error::{Error, Result};
