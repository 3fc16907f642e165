//! Spectral simulator and variational threshold toolkit for the nonlinear
//! Schrödinger equation with an external potential, a local nonlinearity and a
//! Hartree convolution term:
//!
//! ```text
//! i u_t = -Δu + V u - f(|u|²) u - (W ⋆ |u|²) u
//! ```

// Negated float comparisons are deliberate: they reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod classify;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod functionals;
pub mod grid;
pub mod groundstate;
pub mod model;
pub mod projection;
pub mod snapshot;
pub mod thresholds;

pub use error::{NlsError, Result};
