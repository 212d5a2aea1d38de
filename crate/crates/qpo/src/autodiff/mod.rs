//! Reverse-mode automatic differentiation for small MLPs.
//!
//! The scope is deliberately narrow: feed-forward networks made of affine
//! layers with tanh between them, evaluated one input vector at a time in
//! `f64`. [`forward`] records a vector-valued Wengert tape; [`backward`]
//! replays it against an output seed and returns the seed-Jacobian product
//! with respect to the flat parameter vector. [`finite_diff`] is the
//! independent oracle used by tests.

mod fd;
mod params;
mod tape;

pub use fd::finite_diff;
pub use params::{BlockSpec, Gradient, ParamLayout, ParamVector};
pub use tape::{backward, forward, MlpSpec, Tape};
