//! Constrained random perturbations of two-qubit density operators.
//!
//! States are perturbed through their non-negative square roots, corrected
//! with Lagrange multipliers so that trace, energy, or entropy stay fixed,
//! and then characterized with the usual distance and entanglement measures.

pub mod error;
pub mod io;
pub mod linalg;
pub mod measures;
pub mod pauli;
pub mod perturb;
pub mod random;
pub mod stats;

pub use error::{Error, Result};
