//! Homogenization-based iterative solver for `-div(a grad u) = f` on the
//! square `(0, r)^2` with a random checkerboard coefficient.
//!
//! The crate provides every stage of the pipeline:
//!
//! - [`mesh`]: structured P1 triangulation refined `k` times per unit cell,
//! - [`coeff`]: seeded checkerboard fields and the homogenized matrix,
//!   analytic or estimated on a representative volume,
//! - [`assembly`]: stiffness, mass and load assembly with Dirichlet
//!   elimination,
//! - [`sparse`]: CSR matrices, conjugate gradients and sparse Cholesky,
//! - [`iteration`]: the step map, iteration runs and contraction estimates,
//! - [`experiments`]: reproducible sweeps over `r`, `λ` and seeds with CSV
//!   output.
//!
//! ```no_run
//! use homog::{assembly, coeff, iteration, mesh};
//!
//! let mesh = mesh::build_mesh(50, 3)?;
//! let field = coeff::sample_checkerboard(50, 7, 1.0, 9.0)?;
//! let abar = coeff::analytic_abar(1.0, 9.0)?;
//! let system = assembly::assemble(&mesh, &field, &abar, 1.0)?;
//! let record = iteration::run(&system, &iteration::IterationConfig::new(0.2), None)?;
//! let rho = iteration::estimate_rho(&record, iteration::RHO_WINDOW)?;
//! println!("contraction factor {:.3}", rho.factor());
//! # Ok::<(), homog::Error>(())
//! ```

pub mod assembly;
pub mod coeff;
mod error;
pub mod experiments;
pub mod iteration;
pub mod mesh;
pub mod sparse;

pub use error::{Error, Result, SubSolveStage};
