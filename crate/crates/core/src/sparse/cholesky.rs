use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Side};

use super::SparseSpd;
use crate::error::{Error, Result};

/// Sparse `L L^T` factorization of a symmetric positive definite matrix.
///
/// The symbolic analysis (fill-reducing ordering and elimination tree) is
/// cached on the matrix pattern, so factoring several matrices assembled on
/// one mesh pays for it once.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    llt: Llt<usize, f64>,
    n: usize,
}

impl CholeskyFactor {
    pub fn new(a: &SparseSpd) -> Result<Self> {
        let n = a.n();
        let symbolic = a.pattern().symbolic_cholesky()?;
        let view = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
        let mat = SparseColMatRef::new(view, a.values());
        let llt = Llt::try_new_with_symbolic(symbolic, mat, Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(CholeskyFactor { llt, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        if self.n == 0 {
            return Ok(());
        }
        let rhs = MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.llt.solve_in_place_with_conj(Conj::No, rhs);
        Ok(())
    }
}

/// Solves `A x = b` exactly (up to rounding) by sparse Cholesky.
pub fn direct_solve(a: &SparseSpd, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            actual: b.len(),
        });
    }
    CholeskyFactor::new(a)?.solve(b)
}
