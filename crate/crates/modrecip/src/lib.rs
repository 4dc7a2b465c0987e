//! Experiment harness for discrete modulus computations.
//!
//! A run reads a TOML configuration, expands it into instances (grid sizes,
//! exponents, norms), solves them on a worker pool and returns a [`Report`]
//! whose rows each carry a value, its reference, a tolerance and a verdict.
//! Reports serialize to JSON and CSV; see [`report`] for the formats.

pub mod cli;
pub mod config;
mod error;
pub mod experiments;
pub mod report;

pub use config::{Config, Experiment};
pub use error::HarnessError;
pub use experiments::run;
pub use report::Report;
