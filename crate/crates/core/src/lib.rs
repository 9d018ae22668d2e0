//! Collective diffusion over networks.
//!
//! This crate simulates aggregate-level cascades in which each node holds a
//! population of individuals, learns the hidden network structure and edge
//! activation probabilities from timestamped activation counts by per-node
//! concave maximum likelihood, and fits turn-probability flow models from
//! aggregate inflow/outflow counts by closed-form MLE and EM.

pub mod error;
pub mod eval;
pub mod fileio;
pub mod flow;
pub mod graph;
pub mod harness;
pub mod infer;
pub mod math;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
