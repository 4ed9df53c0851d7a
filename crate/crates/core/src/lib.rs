//! Ground-state physics of the three-level Jaynes–Cummings–Hubbard model:
//! exact sector diagonalization of chains and self-consistent cluster
//! mean-field theory on the square lattice.

pub mod basis;
pub mod cli;
pub mod cmft;
pub mod eigensolver;
pub mod error;
pub mod hamiltonian;
pub mod observables;

pub use error::{JchError, Result};
