//! Contact Hamiltonian systems on chart atlases: Jacobi brackets, contact
//! Hamiltonian fields of functions and of line-bundle sections, momentum maps
//! to projective space, stratification by the commuting-symmetry foliation,
//! flows with invariant monitors and torus frequency/action extraction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod jacobi;
pub mod models;
pub mod numkernel;
pub mod par;
pub mod sampling;

pub use error::{Error, Result};
