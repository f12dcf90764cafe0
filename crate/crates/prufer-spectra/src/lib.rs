//! Eigenvalues of block Jacobi matrices and linear Hamiltonian systems via
//! matrix Prüfer phases and Lagrangian intersection theory.

pub mod cli;
pub mod eigensolver;
pub mod error;
pub mod hamiltonian;
pub mod indices;
pub mod jacobi;
pub mod linalg;
pub mod model;
pub mod output;
pub mod sampling;
pub mod symplectic;
pub mod tracking;

pub use error::{Error, Result};
