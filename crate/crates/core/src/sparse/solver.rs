use std::sync::Arc;

use serde::Serialize;

use super::{cg_solve_with, CgOptions, CholeskyFactor, SparseSpd};
use crate::error::{Error, Result};

/// Choice of solver for repeated solves with one matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LinearSolver {
    /// Sparse Cholesky, factored once and reused.
    #[default]
    Cholesky,
    /// Conjugate gradients, optionally Jacobi preconditioned.
    Cg(CgOptions),
}

impl std::fmt::Display for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LinearSolver::Cholesky => f.write_str("cholesky"),
            LinearSolver::Cg(o) if o.jacobi => write!(f, "cg-jacobi(tol={:e})", o.tol),
            LinearSolver::Cg(o) => write!(f, "cg(tol={:e})", o.tol),
        }
    }
}

/// A matrix made ready for repeated solves.
#[derive(Debug, Clone)]
pub enum PreparedSolver {
    Factor(Arc<CholeskyFactor>),
    Iterative { matrix: SparseSpd, opts: CgOptions },
}

impl PreparedSolver {
    pub fn new(matrix: SparseSpd, solver: &LinearSolver) -> Result<Self> {
        Ok(match solver {
            LinearSolver::Cholesky => PreparedSolver::Factor(Arc::new(CholeskyFactor::new(&matrix)?)),
            LinearSolver::Cg(opts) => PreparedSolver::Iterative { matrix, opts: *opts },
        })
    }

    pub fn from_factor(factor: Arc<CholeskyFactor>) -> Self {
        PreparedSolver::Factor(factor)
    }

    /// Solves `A x = b`; CG non-convergence is an error here.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            PreparedSolver::Factor(f) => f.solve(b),
            PreparedSolver::Iterative { matrix, opts } => {
                let (x, report) = cg_solve_with(matrix, b, None, opts)?;
                if !report.converged {
                    return Err(Error::NotConverged {
                        iterations: report.iterations,
                        residual: report.final_residual,
                    });
                }
                Ok(x)
            }
        }
    }
}
