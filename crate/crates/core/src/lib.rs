//! Conditional energy-based models `p(y|x) ∝ exp f(x, y)` for 1D regression,
//! trained with importance sampling, MCMC, noise contrastive and score
//! matching objectives, and evaluated against known densities.

pub mod autodiff;
pub mod bench;
pub mod checks;
pub mod cli;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod methods;
pub mod model;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
