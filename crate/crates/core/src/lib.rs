//! Exact simulation of random shallow ReLU networks driven by compound
//! Poisson noise, with closed-form and quadrature predictions of their
//! statistics and Monte Carlo suites that check one against the other.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod mc_stats;
pub mod numeric;
pub mod oracle;
pub mod process;
pub mod quadrature;
pub mod verify;
pub mod weight_laws;

pub use error::{Error, Result};
