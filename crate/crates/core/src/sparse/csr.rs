use std::io::Write;
use std::sync::{Arc, OnceLock};

use faer::sparse::linalg::solvers::SymbolicLlt;
use faer::sparse::SymbolicSparseColMatRef;
use faer::Side;

use crate::error::{Error, Result};

/// Structurally symmetric CSR sparsity pattern.
///
/// Patterns are shared between matrices assembled on the same mesh; the
/// symbolic Cholesky analysis is computed once per pattern and reused.
#[derive(Debug)]
pub struct CsrPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: OnceLock<SymbolicLlt<usize>>,
}

impl CsrPattern {
    /// Validates and wraps a CSR pattern: sorted, unique, in-range column
    /// indices and a symmetric structure.
    pub fn new(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "CSR pattern",
            detail,
        };
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 || row_ptr[n] != col_idx.len() {
            return Err(bad("row pointer length or bounds".into()));
        }
        for i in 0..n {
            let (s, e) = (row_ptr[i], row_ptr[i + 1]);
            if s > e {
                return Err(bad(format!("row {i} has negative length")));
            }
            let row = &col_idx[s..e];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad(format!("row {i} columns not strictly increasing")));
            }
            if row.last().is_some_and(|&c| c >= n) {
                return Err(bad(format!("row {i} column out of range")));
            }
        }
        let pattern = CsrPattern {
            n,
            row_ptr,
            col_idx,
            symbolic: OnceLock::new(),
        };
        for i in 0..n {
            for &j in pattern.row(i) {
                if pattern.position(j, i).is_none() {
                    return Err(bad(format!("entry ({i},{j}) has no mirror")));
                }
            }
        }
        Ok(pattern)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Column indices of row `i`.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Offset of entry `(i, j)` in the value array.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let s = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|p| s + p)
    }

    pub(crate) fn symbolic_cholesky(&self) -> Result<SymbolicLlt<usize>> {
        if let Some(s) = self.symbolic.get() {
            return Ok(s.clone());
        }
        // A symmetric CSR pattern is its own CSC transpose.
        let view = SymbolicSparseColMatRef::new_checked(
            self.n,
            self.n,
            &self.row_ptr,
            None,
            &self.col_idx,
        );
        let symbolic = SymbolicLlt::try_new(view, Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(self.symbolic.get_or_init(|| symbolic).clone())
    }
}

/// Symmetric (positive definite or semidefinite) matrix in CSR layout.
#[derive(Debug, Clone)]
pub struct SparseSpd {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl SparseSpd {
    pub fn new(pattern: Arc<CsrPattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::DimensionMismatch {
                expected: pattern.nnz(),
                actual: values.len(),
            });
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format {
                what: "sparse matrix",
                detail: format!("non-finite value at offset {p}"),
            });
        }
        Ok(SparseSpd { pattern, values })
    }

    /// Builds a matrix from raw CSR arrays.
    pub fn from_csr(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        Self::new(Arc::new(CsrPattern::new(n, row_ptr, col_idx)?), values)
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    /// Every off-diagonal entry must be given together with its mirror.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        if let Some(&(i, j, _)) = sorted.iter().find(|&&(i, j, _)| i >= n || j >= n) {
            return Err(Error::OutOfRange {
                index: i.max(j),
                len: n,
            });
        }
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::from_csr(n, row_ptr, col_idx, values)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self::from_csr(n, (0..=n).collect(), (0..n).collect(), d.to_vec())
            .expect("diagonal pattern is valid")
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.pattern.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.pattern.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entry `(i, j)`, zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    pub fn same_pattern(&self, other: &SparseSpd) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern)
            || (self.pattern.row_ptr == other.pattern.row_ptr
                && self.pattern.col_idx == other.pattern.col_idx)
    }

    /// `alpha * self + beta * other` on a shared pattern.
    pub fn linear_combination(&self, alpha: f64, other: &SparseSpd, beta: f64) -> Result<SparseSpd> {
        if !self.same_pattern(other) {
            return Err(Error::invalid("linear combination of matrices with different patterns"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        SparseSpd::new(Arc::clone(&self.pattern), values)
    }

    pub fn scaled(&self, alpha: f64) -> SparseSpd {
        SparseSpd {
            pattern: Arc::clone(&self.pattern),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n()];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        let rp = &self.pattern.row_ptr;
        let ci = &self.pattern.col_idx;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in rp[i]..rp[i + 1] {
                acc += self.values[p] * x[ci[p]];
            }
            *yi = acc;
        }
        Ok(())
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        let ax = self.spmv(x)?;
        Ok(super::dot(x, &ax))
    }

    /// Symmetric permutation `P A P^T` where row `i` of the result is row
    /// `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<SparseSpd> {
        self.check_len(perm.len())?;
        let mut inverse = vec![usize::MAX; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            if old >= perm.len() || inverse[old] != usize::MAX {
                return Err(Error::invalid("not a permutation"));
            }
            inverse[old] = new;
        }
        let mut triplets = Vec::with_capacity(self.nnz());
        for old_i in 0..self.n() {
            for p in self.pattern.row_ptr[old_i]..self.pattern.row_ptr[old_i + 1] {
                let old_j = self.pattern.col_idx[p];
                triplets.push((inverse[old_i], inverse[old_j], self.values[p]));
            }
        }
        SparseSpd::from_triplets(self.n(), &triplets)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n()]; self.n()];
        for (i, row) in dense.iter_mut().enumerate() {
            for p in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                row[self.pattern.col_idx[p]] = self.values[p];
            }
        }
        dense
    }

    /// Coordinate text export: a `% rows cols nnz` header, then one
    /// zero-based `row col value` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "% {} {} {}", self.n(), self.n(), self.nnz())?;
        for i in 0..self.n() {
            for p in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                writeln!(out, "{} {} {:e}", i, self.pattern.col_idx[p], self.values[p])?;
            }
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: len,
            });
        }
        Ok(())
    }
}
