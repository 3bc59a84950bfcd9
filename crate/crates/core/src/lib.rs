//! Residual-based tests of symmetry for the innovations of AR(p) models:
//! simulation, estimation, test statistics, limiting laws and a Monte Carlo
//! harness.

pub mod ar_process;
pub mod config;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod innovation;
pub mod limit_laws;
pub mod report;
pub mod seed;
pub mod symmetry_stats;

pub use error::{Error, Result};
