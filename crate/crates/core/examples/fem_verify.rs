//! First-order convergence of the P1 discretization on a manufactured
//! solution; the error should halve with each refinement.

use homog::experiments::manufactured_error;

fn main() -> homog::Result<()> {
    let mut previous: Option<f64> = None;
    for k in 0..=4 {
        let level = manufactured_error(8, k)?;
        let ratio = previous.map_or(String::new(), |p| format!("  ratio {:.3}", p / level.h1_error));
        println!("k={k}  h1 error {:.4e}  relative {:.4e}{ratio}", level.h1_error, level.rel_error);
        previous = Some(level.h1_error);
    }
    Ok(())
}
