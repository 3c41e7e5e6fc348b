//! Estimates the homogenized matrix from finite blocks of the medium and
//! compares with the analytic value sqrt(lo * hi) for the two-phase
//! checkerboard.
//!
//! cargo run --release --example rve_abar -- [lo] [hi]

use homog::coeff::{analytic_abar, rve_estimate_abar, sample_checkerboard, RveBoundary, RveOptions};

fn main() -> homog::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let (lo, hi) = (args.first().copied().unwrap_or(1.0), args.get(1).copied().unwrap_or(9.0));
    println!("analytic: {:.4}", analytic_abar(lo, hi)?.abar[0][0]);

    for boundary in [RveBoundary::DirichletAffine, RveBoundary::Periodic] {
        for l in [16, 32, 64] {
            let opts = RveOptions { boundary, ..Default::default() };
            let mut diag = Vec::new();
            for seed in 0..4 {
                let est = rve_estimate_abar(&sample_checkerboard(l, seed, lo, hi)?, &opts)?;
                diag.push(0.5 * (est.abar[0][0] + est.abar[1][1]));
            }
            let mean = diag.iter().sum::<f64>() / diag.len() as f64;
            println!("{boundary:?} L={l:<3} mean diagonal {mean:.4}  samples {diag:.3?}");
        }
    }
    Ok(())
}
