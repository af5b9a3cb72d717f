//! Regularized least-squares space-time finite elements for backward heat
//! problems: meshes, Kronecker-structured operators, Riesz preconditioners,
//! a preconditioned Krylov solver and an exact spectral reference solution.

pub mod assembly;
pub mod cli;
pub mod error;
pub mod krylov;
pub mod mesh;
pub mod operators;
pub mod oracle;
pub mod precond;
pub mod quadrature;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
