//! Dense-matrix reverse-mode automatic differentiation.
//!
//! A [`Tape`] is rebuilt for every forward pass. Operations check shapes and
//! reject non-finite results; [`Tape::backward`] walks the recorded nodes in
//! reverse and accumulates into parameter leaves.

mod matrix;
mod tape;

pub use matrix::{dot, Matrix};
pub use tape::{sigmoid, Tape, Var};
