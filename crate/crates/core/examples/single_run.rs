//! One iteration run on a random checkerboard, printing the error after each
//! step and the fitted contraction factor.
//!
//! cargo run --release --example single_run -- [r] [lambda] [seed]

use homog::assembly::assemble;
use homog::coeff::{analytic_abar, sample_checkerboard};
use homog::iteration::{estimate_rho, run, IterationConfig, RHO_WINDOW};
use homog::mesh::build_mesh;

fn main() -> homog::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let r: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(40);
    let lambda: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let mesh = build_mesh(r, 3)?;
    let field = sample_checkerboard(r, seed, 1.0, 9.0)?;
    let system = assemble(&mesh, &field, &analytic_abar(1.0, 9.0)?, 1.0)?;
    println!("r = {r}, {} unknowns, {:.1}% high cells", system.n_dofs(), 100.0 * field.high_fraction());

    let record = run(&system, &IterationConfig::new(lambda), None)?;
    for (i, rel) in record.relative_errors().iter().enumerate() {
        println!("{:>3}  {rel:.3e}", i + 1);
    }
    for w in &record.warnings {
        println!("warning: {w}");
    }
    let est = estimate_rho(&record, RHO_WINDOW)?;
    println!("{:?} after {:?} iterations; contraction factor {:.4}", record.outcome, record.iterations_to_converge, est.factor());
    Ok(())
}
