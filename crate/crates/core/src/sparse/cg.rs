use serde::Serialize;

use super::{dot, norm, SparseSpd};
use crate::error::{Error, Result};

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// True relative residual `|b - Ax| / |b|` of the returned iterate.
    pub final_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Diagonal (Jacobi) preconditioning.
    pub jacobi: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions {
            tol: 1e-12,
            max_iter: 100_000,
            jacobi: false,
        }
    }
}

/// Unpreconditioned conjugate gradients from a zero initial guess.
///
/// Non-convergence is not an error: the last iterate is returned with
/// `converged == false`.
pub fn cg_solve(
    a: &SparseSpd,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    cg_solve_with(
        a,
        b,
        None,
        &CgOptions {
            tol,
            max_iter,
            jacobi: false,
        },
    )
}

/// Conjugate gradients with an optional initial guess and preconditioner.
pub fn cg_solve_with(
    a: &SparseSpd,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &CgOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.len(),
        });
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::invalid(format!("CG tolerance {} outside (0, 1)", opts.tol)));
    }
    if opts.max_iter == 0 {
        return Err(Error::invalid("CG max_iter must be at least 1"));
    }

    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                final_residual: 0.0,
                converged: true,
            },
        ));
    }

    let inv_diag: Option<Vec<f64>> = if opts.jacobi {
        let d = a.diag();
        if let Some(i) = d.iter().position(|&v| v <= 0.0) {
            return Err(Error::invalid(format!("Jacobi preconditioner: nonpositive diagonal at {i}")));
        }
        Some(d.iter().map(|v| 1.0 / v).collect())
    } else {
        None
    };
    let precondition = |r: &[f64], z: &mut Vec<f64>| match &inv_diag {
        Some(inv) => {
            z.clear();
            z.extend(r.iter().zip(inv).map(|(r, d)| r * d));
        }
        None => {
            z.clear();
            z.extend_from_slice(r);
        }
    };

    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x0.len(),
            })
        }
        None => vec![0.0; n],
    };
    let mut ax = vec![0.0; n];
    let mut r = vec![0.0; n];
    let true_residual = |x: &[f64], ax: &mut [f64], r: &mut [f64]| -> Result<f64> {
        a.spmv_into(x, ax)?;
        for i in 0..n {
            r[i] = b[i] - ax[i];
        }
        Ok(norm(r) / b_norm)
    };

    let mut rel = true_residual(&x, &mut ax, &mut r)?;
    let mut iterations = 0;
    let mut z = Vec::with_capacity(n);
    let mut ap = vec![0.0; n];

    // Restart from the true residual whenever the recursive residual claims
    // convergence that the true one does not confirm; give up once a restart
    // stops reducing the true residual (the attainable accuracy has been
    // reached) or after a bounded number of restarts.
    const MAX_RESTARTS: usize = 20;
    let mut previous = f64::INFINITY;
    let mut cycles = 0;
    'outer: while rel > opts.tol && iterations < opts.max_iter && rel < previous && cycles <= MAX_RESTARTS {
        previous = rel;
        cycles += 1;
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < opts.max_iter {
            a.spmv_into(&p, &mut ap)?;
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                // Breakdown: the matrix is not positive definite on the
                // Krylov space.
                break 'outer;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            if norm(&r) / b_norm <= opts.tol {
                break;
            }
            precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        rel = true_residual(&x, &mut ax, &mut r)?;
    }

    // The last iterate minimizes the energy norm of the error over the
    // Krylov space, so it is returned even without convergence.
    let final_residual = true_residual(&x, &mut ax, &mut r)?;
    Ok((
        x,
        SolveReport {
            iterations,
            final_residual,
            converged: final_residual <= opts.tol,
        },
    ))
}
