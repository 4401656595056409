//! Neural-operator stress laboratory: reference PDE solvers, a factorized
//! Fourier neural operator with hand-written gradients, and a harness that
//! measures how trained surrogates degrade away from their training
//! distribution (parameter shifts, boundary and payoff shifts, resolution
//! extrapolation, long rollouts, input perturbations).
//!
//! Everything is deterministic: randomness flows from one campaign seed
//! through named derivation streams, so datasets, initializations, and
//! stress draws are reproducible independent of execution order.

pub mod campaign;
pub mod error;
pub mod fft;
pub mod fieldio;
pub mod fno;
pub mod grid;
pub mod interp;
pub mod problems;
pub mod sampler;
pub mod seeds;
pub mod solvers;
pub mod report;
pub mod spectrum;
pub mod stats;
pub mod stress;
pub mod trainer;

pub use error::{Error, Result};
