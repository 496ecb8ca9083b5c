//! Reduced models for the slow variables of a linearly coupled two-scale
//! system, built from a quasi-Gaussian linear response of the fast
//! dynamics, and the tooling to compare them with the full rescaled
//! two-scale Lorenz 96 model.

pub mod closure;
pub mod error;
pub mod experiment;
pub mod integrator;
pub mod model;
pub mod stats;

pub use error::{Error, Result};
