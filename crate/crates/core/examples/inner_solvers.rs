//! Compares the inner solvers on the shifted operator of one step: sparse
//! Cholesky (factor once, solve many) against plain and Jacobi-preconditioned
//! conjugate gradients.

use std::time::Instant;

use homog::assembly::assemble;
use homog::coeff::{analytic_abar, sample_checkerboard};
use homog::mesh::build_mesh;
use homog::sparse::{cg_solve_with, CgOptions, CholeskyFactor};

fn main() -> homog::Result<()> {
    let r = 30;
    let system = assemble(&build_mesh(r, 3)?, &sample_checkerboard(r, 2, 1.0, 9.0)?, &analytic_abar(1.0, 9.0)?, 1.0)?;
    let lambda: f64 = 0.2;
    let shifted = system.a_het.linear_combination(1.0, &system.mass, lambda * lambda)?;
    println!("{} unknowns, {} nonzeros", shifted.n(), shifted.nnz());

    let t = Instant::now();
    let factor = CholeskyFactor::new(&shifted)?;
    let setup = t.elapsed();
    let t = Instant::now();
    let x = factor.solve(&system.load)?;
    println!("cholesky: factor {setup:.2?}, solve {:.2?}", t.elapsed());

    for jacobi in [false, true] {
        let t = Instant::now();
        let (y, rep) = cg_solve_with(&shifted, &system.load, None, &CgOptions { jacobi, ..Default::default() })?;
        let diff = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "cg (jacobi = {jacobi}): {} iterations, residual {:.1e}, {:.2?}, max difference {diff:.1e}",
            rep.iterations,
            rep.final_residual,
            t.elapsed()
        );
    }
    Ok(())
}
