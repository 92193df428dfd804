//! Invariant perfect correlations of bipartite qudit states.
//!
//! Two observers measure their halves of a `d ⊗ d` state in the same,
//! arbitrary orthonormal basis. A correlation is *invariantly perfect* when the
//! outcomes are always paired one-to-one and the type of the pairing does not
//! depend on the basis. The two-qubit singlet has this property; no other
//! state, for any `d ≥ 2`, does. This crate checks that numerically:
//!
//! - [`qudit`]: density matrices, bases, Haar sampling, joint outcome statistics.
//! - [`pauli`]: two-qubit correlation tensors and the singlet certificate.
//! - [`graph`]: outcome maps as directed graphs and their cycle types.
//! - [`invariance`]: invariance defects, falsification witnesses, and the
//!   structural chain for all-loop correlations.
//! - [`channel`]: Monte Carlo of collective `U ⊗ U` transmission noise.
//! - [`io`]: JSON file formats.

pub mod assignment;
pub mod channel;
pub mod error;
pub mod graph;
pub mod invariance;
pub mod io;
pub mod linalg;
pub mod parallel;
pub mod pauli;
pub mod qudit;
pub mod rng;

pub use error::{Error, Result};
