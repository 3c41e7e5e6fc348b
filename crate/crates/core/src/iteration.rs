//! The homogenization-based iteration and measurement of its contraction.
//!
//! One step maps the current iterate `v` to `v + u0 + ũ` where
//!
//! ```text
//! (λ²M + A)   u0 = F − A v
//! Ā           ū  = λ² M u0
//! (λ²M + A)   ũ  = (λ²M + Ā) ū
//! ```
//!
//! with `A` the heterogeneous stiffness, `Ā` the stiffness of the
//! homogenized matrix and `M` the mass matrix. The fine-scale solves act
//! below the length scale `1/λ`; the homogenized solve handles everything
//! above it.

use std::time::Instant;

use serde::Serialize;

use crate::assembly::{h1_seminorm, FemSystem};
use crate::error::{Error, Result, SubSolveStage};
use crate::sparse::{direct_solve, CgOptions, LinearSolver, PreparedSolver};

/// How the three sub-problems of a step are solved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerSolver {
    /// Sparse Cholesky factors computed once per run and reused every step.
    #[default]
    Cholesky,
    /// Unpreconditioned conjugate gradients to `inner_tol`.
    Cg,
    /// Jacobi-preconditioned conjugate gradients to `inner_tol`.
    CgJacobi,
}

impl std::str::FromStr for InnerSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(InnerSolver::Cholesky),
            "cg" => Ok(InnerSolver::Cg),
            "cg-jacobi" => Ok(InnerSolver::CgJacobi),
            other => Err(Error::invalid(format!("unknown inner solver {other:?}"))),
        }
    }
}

impl std::fmt::Display for InnerSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InnerSolver::Cholesky => "cholesky",
            InnerSolver::Cg => "cg",
            InnerSolver::CgJacobi => "cg-jacobi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationConfig {
    /// Scale-separation parameter, in `(0, 1]`.
    pub lambda: f64,
    /// Relative H1-seminorm error at which the run stops.
    pub tol: f64,
    /// Maximum number of steps.
    pub max_iter: usize,
    /// Relative residual tolerance of iterative sub-solves.
    pub inner_tol: f64,
    pub inner_solver: InnerSolver,
    /// Iteration cap of iterative sub-solves.
    pub inner_max_iter: usize,
}

impl IterationConfig {
    pub fn new(lambda: f64) -> Self {
        IterationConfig {
            lambda,
            tol: 1e-9,
            max_iter: 50,
            inner_tol: 1e-12,
            inner_solver: InnerSolver::Cholesky,
            inner_max_iter: 200_000,
        }
    }

    pub fn with_inner_solver(mut self, inner: InnerSolver) -> Self {
        self.inner_solver = inner;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::invalid(format!("lambda {} outside (0, 1]", self.lambda)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::invalid(format!("tolerance {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if !(self.inner_tol > 0.0 && self.inner_tol < 1.0) {
            return Err(Error::invalid(format!("inner tolerance {} outside (0, 1)", self.inner_tol)));
        }
        Ok(())
    }

    pub fn linear_solver(&self) -> LinearSolver {
        let cg = |jacobi| {
            LinearSolver::Cg(CgOptions {
                tol: self.inner_tol,
                max_iter: self.inner_max_iter,
                jacobi,
            })
        };
        match self.inner_solver {
            InnerSolver::Cholesky => LinearSolver::Cholesky,
            InnerSolver::Cg => cg(false),
            InnerSolver::CgJacobi => cg(true),
        }
    }
}

/// Wall time of one step, split by sub-solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StepTiming {
    pub u0_ms: f64,
    pub ubar_ms: f64,
    pub utilde_ms: f64,
    pub total_ms: f64,
}

/// Intermediate quantities of one step.
#[derive(Debug, Clone)]
pub struct StepParts {
    pub u0: Vec<f64>,
    pub ubar: Vec<f64>,
    pub utilde: Vec<f64>,
    pub next: Vec<f64>,
    pub timing: StepTiming,
}

/// The step map `v -> v̂` with its linear solvers prepared.
pub struct StepOperator<'a> {
    system: &'a FemSystem,
    lambda: f64,
    shifted: PreparedSolver,
    homogenized: PreparedSolver,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn sub_solve(stage: SubSolveStage, solver: &PreparedSolver, rhs: &[f64]) -> Result<Vec<f64>> {
    solver.solve(rhs).map_err(|e| Error::SubSolve {
        stage,
        source: Box::new(e),
    })
}

impl<'a> StepOperator<'a> {
    pub fn new(system: &'a FemSystem, config: &IterationConfig) -> Result<Self> {
        config.validate()?;
        let homogenized = PreparedSolver::new(system.a_bar.clone(), &config.linear_solver())?;
        Self::with_homogenized(system, config, homogenized)
    }

    /// Reuses a solver for `Ā` prepared elsewhere (it depends only on the
    /// mesh and the homogenized matrix, not on the coefficient sample).
    pub fn with_homogenized(
        system: &'a FemSystem,
        config: &IterationConfig,
        homogenized: PreparedSolver,
    ) -> Result<Self> {
        config.validate()?;
        let lambda = config.lambda;
        let shifted_matrix = system.a_het.linear_combination(1.0, &system.mass, lambda * lambda)?;
        let shifted = PreparedSolver::new(shifted_matrix, &config.linear_solver())?;
        Ok(StepOperator {
            system,
            lambda,
            shifted,
            homogenized,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn system(&self) -> &FemSystem {
        self.system
    }

    pub fn step(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.step_parts(v)?.next)
    }

    pub fn step_parts(&self, v: &[f64]) -> Result<StepParts> {
        let sys = self.system;
        let n = sys.n_dofs();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: v.len(),
            });
        }
        let l2 = self.lambda * self.lambda;
        let start = Instant::now();

        let t = Instant::now();
        let av = sys.a_het.spmv(v)?;
        let rhs: Vec<f64> = sys.load.iter().zip(&av).map(|(f, a)| f - a).collect();
        let u0 = sub_solve(SubSolveStage::FineCorrection, &self.shifted, &rhs)?;
        let u0_ms = ms_since(t);

        let t = Instant::now();
        let rhs: Vec<f64> = sys.mass.spmv(&u0)?.into_iter().map(|m| l2 * m).collect();
        let ubar = sub_solve(SubSolveStage::Homogenized, &self.homogenized, &rhs)?;
        let ubar_ms = ms_since(t);

        let t = Instant::now();
        let mu = sys.mass.spmv(&ubar)?;
        let au = sys.a_bar.spmv(&ubar)?;
        let rhs: Vec<f64> = mu.iter().zip(&au).map(|(m, a)| l2 * m + a).collect();
        let utilde = sub_solve(SubSolveStage::PostCorrection, &self.shifted, &rhs)?;
        let utilde_ms = ms_since(t);

        let next = (0..n).map(|i| v[i] + u0[i] + utilde[i]).collect();
        Ok(StepParts {
            u0,
            ubar,
            utilde,
            next,
            timing: StepTiming {
                u0_ms,
                ubar_ms,
                utilde_ms,
                total_ms: ms_since(start),
            },
        })
    }

    /// The coarse correction computed from `Ā ū = F − A (v + u0)`, the
    /// equivalent form of the homogenized solve. Agrees with the primary form
    /// up to the residual of the `u0` solve.
    pub fn ubar_from_residual(&self, v: &[f64], u0: &[f64]) -> Result<Vec<f64>> {
        let sys = self.system;
        let w: Vec<f64> = v.iter().zip(u0).map(|(a, b)| a + b).collect();
        let aw = sys.a_het.spmv(&w)?;
        let rhs: Vec<f64> = sys.load.iter().zip(&aw).map(|(f, a)| f - a).collect();
        sub_solve(SubSolveStage::Homogenized, &self.homogenized, &rhs)
    }
}

/// One step from `v` with default solver settings.
pub fn step(system: &FemSystem, lambda: f64, v: &[f64]) -> Result<Vec<f64>> {
    StepOperator::new(system, &IterationConfig::new(lambda))?.step(v)
}

/// The discrete solution `u_h`, by sparse Cholesky.
pub fn reference_solution(system: &FemSystem) -> Result<Vec<f64>> {
    direct_solve(&system.a_het, &system.load)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunOutcome {
    Converged,
    MaxIterations,
    /// The error grew in each of the last five steps.
    Diverged,
}

/// Error history of one run.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    /// `errors[i]` is `||grad(u_h − v^(i+1))||`; `errors[0]` belongs to the
    /// initial guess.
    pub errors: Vec<f64>,
    /// `||grad u_h||`, the normalization of relative errors.
    pub reference_norm: f64,
    /// One-based index of the first iterate below tolerance.
    pub iterations_to_converge: Option<usize>,
    pub outcome: RunOutcome,
    pub config: IterationConfig,
    pub seed: Option<u64>,
    pub r: usize,
    pub k: u32,
    pub step_timings: Vec<StepTiming>,
    pub warnings: Vec<String>,
}

impl IterationRecord {
    pub fn relative_errors(&self) -> Vec<f64> {
        self.errors.iter().map(|e| relative(*e, self.reference_norm)).collect()
    }

    pub fn converged(&self) -> bool {
        self.outcome == RunOutcome::Converged
    }
}

fn relative(e: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        e / norm
    } else {
        e
    }
}

const DIVERGENCE_WINDOW: usize = 5;

/// Runs the iteration from `v_init` (zero when `None`) against the direct
/// solution, building solvers and the reference internally.
pub fn run(system: &FemSystem, config: &IterationConfig, v_init: Option<&[f64]>) -> Result<IterationRecord> {
    config.validate()?;
    let reference = reference_solution(system)?;
    let op = StepOperator::new(system, config)?;
    run_with(&op, &reference, config, v_init)
}

/// Runs the iteration with a prepared operator and reference solution.
pub fn run_with(
    op: &StepOperator<'_>,
    reference: &[f64],
    config: &IterationConfig,
    v_init: Option<&[f64]>,
) -> Result<IterationRecord> {
    config.validate()?;
    let sys = op.system();
    let n = sys.n_dofs();
    if reference.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: reference.len(),
        });
    }
    let mut warnings = Vec::new();
    if config.lambda < 1.0 / sys.r as f64 {
        let msg = format!("lambda {} below 1/r = {}", config.lambda, 1.0 / sys.r as f64);
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let reference_norm = h1_seminorm(sys, reference)?;
    let mut v = match v_init {
        Some(v0) if v0.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: v0.len(),
            })
        }
        Some(v0) => v0.to_vec(),
        None => vec![0.0; n],
    };

    let mut errors = Vec::new();
    let mut step_timings = Vec::new();
    let mut diff = vec![0.0; n];
    let outcome = loop {
        for i in 0..n {
            diff[i] = reference[i] - v[i];
        }
        let e = h1_seminorm(sys, &diff)?;
        errors.push(e);
        if relative(e, reference_norm) <= config.tol {
            break RunOutcome::Converged;
        }
        let growing = errors.len() > DIVERGENCE_WINDOW
            && errors[errors.len() - DIVERGENCE_WINDOW - 1..]
                .windows(2)
                .all(|w| w[1] > w[0]);
        if growing || !e.is_finite() {
            break RunOutcome::Diverged;
        }
        if step_timings.len() == config.max_iter {
            break RunOutcome::MaxIterations;
        }
        let parts = op.step_parts(&v)?;
        step_timings.push(parts.timing);
        v = parts.next;
    };

    Ok(IterationRecord {
        iterations_to_converge: (outcome == RunOutcome::Converged).then_some(errors.len()),
        errors,
        reference_norm,
        outcome,
        config: *config,
        seed: None,
        r: sys.r,
        k: sys.k,
        step_timings,
        warnings,
    })
}

/// Regression estimate of the log contraction factor of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionEstimate {
    /// Least-squares slope of `log(error)` against the iteration index.
    pub rho: f64,
    pub n_points: usize,
    /// Set when fewer than two errors lay above tolerance and the slope was
    /// taken from the first two iterations instead.
    pub fallback: bool,
}

impl ContractionEstimate {
    pub fn factor(&self) -> f64 {
        self.rho.exp()
    }
}

/// Default regression window (iterations `1..=10`).
pub const RHO_WINDOW: usize = 10;

pub fn estimate_rho(record: &IterationRecord, window: usize) -> Result<ContractionEstimate> {
    estimate_rho_from_errors(&record.errors, record.reference_norm, record.config.tol, window)
}

/// Fits `log(errors[i])` over the first `window` iterations, stopping before
/// the first error whose relative size is at or below `tol`.
pub fn estimate_rho_from_errors(
    errors: &[f64],
    reference_norm: f64,
    tol: f64,
    window: usize,
) -> Result<ContractionEstimate> {
    let usable = errors
        .iter()
        .take(window)
        .take_while(|&&e| e > 0.0 && e.is_finite() && relative(e, reference_norm) > tol)
        .count();
    if usable >= 2 {
        return Ok(ContractionEstimate {
            rho: log_slope(&errors[..usable]),
            n_points: usable,
            fallback: false,
        });
    }
    if errors.len() >= 2 && errors[..2].iter().all(|&e| e > 0.0 && e.is_finite()) {
        return Ok(ContractionEstimate {
            rho: (errors[1] / errors[0]).ln(),
            n_points: 2,
            fallback: true,
        });
    }
    Err(Error::invalid(format!(
        "need at least two positive errors to estimate rho, got {errors:?}"
    )))
}

fn log_slope(errors: &[f64]) -> f64 {
    let n = errors.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = errors.iter().map(|e| e.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, e) in errors.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (e.ln() - ym);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Per-seed estimates and their statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionSummary {
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (zero for a single sample).
    pub std_dev: f64,
}

impl ContractionSummary {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("no rho samples"));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_dev = if samples.len() > 1 {
            (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(ContractionSummary { samples, mean, std_dev })
    }

    /// `exp(mean rho)`.
    pub fn factor_of_mean(&self) -> f64 {
        self.mean.exp()
    }

    /// Mean of the per-seed factors `exp(rho)`.
    pub fn mean_factor(&self) -> f64 {
        self.samples.iter().map(|s| s.exp()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Logarithmic factor `sqrt(log(1 + 1/λ))` of the two-dimensional bound.
pub fn ell(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid(format!("lambda {lambda} outside (0, 1]")));
    }
    Ok((1.0 + 1.0 / lambda).ln().sqrt())
}

/// Predicted shape of the contraction factor, `ℓ(λ)^(1/2) λ^(1/2)`.
pub fn predicted_factor_shape(lambda: f64) -> Result<f64> {
    Ok((ell(lambda)? * lambda).sqrt())
}
