//! Learned program similarity over labeled control-flow graphs.
//!
//! The crate covers the whole pipeline: a small imperative language whose
//! functions lower to labeled CFGs, mutation-based corpus generation, exact
//! and approximate graph edit distance for ground truth and baselines, a
//! reverse-mode autodiff engine, the graph neural network itself, and the
//! training and evaluation harness.

pub mod autodiff;
pub mod corpus;
pub mod error;
pub mod ged;
pub mod graph;
pub mod model;
pub mod train;

pub use error::{Error, Result};
