//! Discrete Bayesian network MAP inference with frugal heuristics.
//!
//! The crate implements exact MAP (most probable explanation of a
//! hypothesis set given evidence), simulated-annealing MAP, and the
//! most-frugal-explanation family of heuristics, which marginalize only an
//! estimated-relevant subset of the intermediate variables and sample the
//! rest. A benchmark harness reproduces running-time and accuracy
//! comparisons between the solvers on real networks.

pub mod bench;
pub mod cli;
pub mod engine;
pub mod error;
pub mod model;
pub mod relevance;
pub mod seed;
pub mod solvers;

pub use error::{Error, Result};
