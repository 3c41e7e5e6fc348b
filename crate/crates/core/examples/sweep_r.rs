//! Seed-averaged contraction factor against the domain size, written as CSV.
//!
//! cargo run --release --example sweep_r -- [out.csv]

use homog::experiments::{run_sweep_r, ExperimentConfig, Mode};

fn main() -> homog::Result<()> {
    let mut cfg = ExperimentConfig::new(Mode::SweepR);
    cfg.r_values = vec![10, 20, 40, 60];
    cfg.lambdas = vec![0.1, 0.2, 0.4];
    cfg.seeds = 4;
    cfg.out = Some(std::env::args().nth(1).unwrap_or_else(|| "sweep_r.csv".into()).into());

    let report = run_sweep_r(&cfg)?;
    println!("{:>5} {:>6} {:>10}", "r", "lambda", "exp(mean)");
    for p in &report.points {
        let flag = if p.preasymptotic { "  pre-asymptotic" } else { "" };
        println!("{:>5} {:>6} {:>10.4}{flag}", p.r, p.lambda, p.factor_of_mean.unwrap_or(f64::NAN));
    }
    println!("rows written to {}", cfg.out.unwrap().display());
    Ok(())
}
