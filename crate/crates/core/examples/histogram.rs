//! Distribution of the contraction factor over seeds, as a text histogram.
//!
//! cargo run --release --example histogram -- [seeds]

use homog::experiments::{run_histogram, ExperimentConfig, Mode};

fn main() -> homog::Result<()> {
    let mut cfg = ExperimentConfig::new(Mode::Histogram);
    cfg.r_values = vec![40];
    cfg.lambdas = vec![0.2];
    cfg.seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);

    let report = run_histogram(&cfg)?;
    let factors: Vec<f64> = report.runs.iter().filter_map(|r| r.estimate.map(|e| e.factor())).collect();
    let (lo, hi) = factors.iter().fold((f64::MAX, f64::MIN), |(a, b), &f| (a.min(f), b.max(f)));
    let bins = 10;
    let width = ((hi - lo) / bins as f64).max(1e-12);
    let mut counts = vec![0usize; bins];
    for f in &factors {
        counts[(((f - lo) / width) as usize).min(bins - 1)] += 1;
    }
    for (i, c) in counts.iter().enumerate() {
        println!("{:.4} {}", lo + (i as f64 + 0.5) * width, "#".repeat(*c));
    }
    if let Some(s) = &report.points[0].summary {
        println!("mean rho {:.4}, std {:.4}, exp(mean) {:.4}", s.mean, s.std_dev, s.factor_of_mean());
    }
    Ok(())
}
