//! Numerical laboratory for the effective Hamiltonian of convex
//! Hamilton-Jacobi equations with random Poissonian potentials.

pub mod effective;
pub mod env;
pub mod error;
pub mod hamiltonian;
pub mod numerics;
pub mod solvers;
pub mod stats;

pub use error::{Error, Result};
