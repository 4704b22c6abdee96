//! Bayesian factor regression with smoothly time-varying effects of
//! correlated exposures on multivariate longitudinal outcomes.

pub mod benchmark;
pub mod data;
pub mod draws;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod linalg;
pub mod rng;
pub mod postprocess;
pub mod sampler;
pub mod simulate;
pub mod state;

pub use error::{Error, Result};
pub use rng::RngStream;
