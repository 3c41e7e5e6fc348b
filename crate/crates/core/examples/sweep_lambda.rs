//! Contraction factor against lambda next to the predicted shape
//! `ℓ(λ)^(1/2) λ^(1/2)`.
//!
//! cargo run --release --example sweep_lambda -- [r]

use homog::experiments::{run_sweep_lambda, ExperimentConfig, Mode};

fn main() -> homog::Result<()> {
    let mut cfg = ExperimentConfig::new(Mode::SweepLambda);
    cfg.r_values = vec![std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60)];
    cfg.lambdas = vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5];
    cfg.seeds = 3;

    let report = run_sweep_lambda(&cfg)?;
    for p in &report.points {
        let measured = p.factor_of_mean.unwrap_or(f64::NAN);
        println!(
            "lambda {:<5} measured {measured:.4}  predicted shape {:.4}  ratio {:.3}",
            p.lambda,
            p.predicted,
            measured / p.predicted
        );
    }
    Ok(())
}
