//! Energy-penalty error suppression for Markovian adiabatic quantum computation.
//!
//! The crate builds stabilizer-code penalty Hamiltonians, encodes a logical
//! annealing problem with the code's logical operators, and integrates the
//! resulting Davies-Lindblad adiabatic master equation. Trajectories are
//! post-processed into the excitation-rate decomposition and the
//! arbitrary-time bound on population leaving the instantaneous ground space.
//!
//! Module map:
//!
//! * [`pauli`]: symplectic Pauli strings and real-weighted sums.
//! * [`codes`]: stabilizer codes, penalty Hamiltonians, codespace projectors.
//! * [`model`]: boundary-cancelling schedules and the encoded Hamiltonian.
//! * [`spectral`]: clustered eigendecompositions, Bohr frequencies, resolvents.
//! * [`bath`]: KMS rate functions and Bohr-resolved Lindblad operators.
//! * [`davies`]: the Davies generator, Markov transition matrix, Gibbs states.
//! * [`propagate`]: adaptive integration and rate bookkeeping along a trajectory.
//! * [`bounds`]: bound evaluation and scaling fits.
//! * [`config`], [`cli`], [`verify`]: experiment orchestration and CSV output.

pub mod bath;
pub mod bounds;
pub mod cli;
pub mod codes;
pub mod config;
pub mod davies;
mod error;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod pauli;
pub mod propagate;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::CMatrix;
