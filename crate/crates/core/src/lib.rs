//! Numerical laboratory for diffusions that degenerate on invariant
//! surfaces and their small random perturbations.
//!
//! The crate computes the scaling exponent `gamma` and eigenfunction `phi`
//! of each invariant surface, simulates the unperturbed and perturbed
//! processes, and measures exit probabilities, exit-time power laws and
//! the metastable distributions at the time scales `eps^-gamma_k`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod coeffs;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod io;
pub mod meta;
pub mod models;
pub mod sim;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};
