//! Sparse symmetric linear algebra: CSR storage, conjugate gradients and a
//! sparse Cholesky factorization for exact solves.

mod cg;
mod cholesky;
mod csr;
mod solver;

pub use cg::{cg_solve, cg_solve_with, CgOptions, SolveReport};
pub use cholesky::{direct_solve, CholeskyFactor};
pub use csr::{CsrPattern, SparseSpd};
pub use solver::{LinearSolver, PreparedSolver};

/// Euclidean dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
