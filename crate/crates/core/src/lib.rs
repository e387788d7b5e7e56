//! Projected ensembles of quantum states from Rydberg-chain dynamics, and
//! dataset-driven estimators of how close those ensembles come to a quantum
//! state *k*-design.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`lattice`] enumerates the blockade-constrained basis of a 1-D chain and
//!    [`dynamics`] evolves the all-ground state under the Rydberg Hamiltonian
//!    by exact diagonalization.
//! 2. [`ensemble`] conditions the evolved state on computational-basis bath
//!    outcomes, giving the projected ensemble and its *k*-th moments, which are
//!    compared against the Haar moments from [`haar`].
//! 3. [`sampler`] simulates random-basis measurement shots, and
//!    [`estimator`] / [`crbm`] reconstruct the ensemble from them.
//! 4. [`metrics`] computes trace distances, relative errors and scaling fits;
//!    [`experiments`] wires everything into reproducible CSV pipelines.

pub mod crbm;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod haar;
pub mod lattice;
pub mod metrics;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
