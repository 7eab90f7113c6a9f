//! Warm-start and constrained QAOA for budget-constrained portfolio
//! optimization, simulated exactly on a dense statevector.

pub mod encoding;
pub mod error;
pub mod harness;
pub mod optimizers;
pub mod portfolio;
pub mod quality;
pub mod simulator;

pub use error::{Error, Result};
