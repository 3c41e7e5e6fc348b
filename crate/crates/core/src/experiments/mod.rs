//! Experiment drivers: single runs, sweeps over `r` and `λ`, seed
//! histograms, homogenized-matrix estimation and a discretization check.
//!
//! Seeds are `base_seed + i`, so any point of a sweep can be re-run on its
//! own. For every `(r, seed)` the system and its direct solution are computed
//! once and shared by all `λ`; the factorization of the homogenized operator
//! is shared by all seeds of one `r`.

mod output;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{assemble_with_options, h1_error_against, load_vector, AssemblyOptions};
use crate::coeff::{analytic_abar, rve_estimate_abar, sample_checkerboard, CheckerboardField, HomogenizedMatrix, RveBoundary, RveOptions};
use crate::error::{Error, Result};
use crate::iteration::{
    estimate_rho, predicted_factor_shape, reference_solution, run_with, ContractionEstimate, ContractionSummary,
    InnerSolver, IterationConfig, IterationRecord, StepOperator, RHO_WINDOW,
};
use crate::mesh::{build_mesh, StructuredMesh};
use crate::sparse::{direct_solve, PreparedSolver};

pub use output::{metadata_path, read_rows, CsvSink, ResultRow, COLUMNS, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Single,
    SweepR,
    SweepLambda,
    Histogram,
    Rve,
    FemVerify,
}

impl Mode {
    /// Name used in the `mode` column and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Mode::Single => "run",
            Mode::SweepR => "sweep-r",
            Mode::SweepLambda => "sweep-lambda",
            Mode::Histogram => "histogram",
            Mode::Rve => "rve",
            Mode::FemVerify => "fem-verify",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Domain sizes (block sizes `L` for `rve`).
    pub r_values: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub seeds: usize,
    pub base_seed: u64,
    /// Refinement level (finest level for `fem-verify`).
    pub k: u32,
    pub tol: f64,
    pub inner_tol: f64,
    pub inner_solver: InnerSolver,
    pub max_iter: usize,
    pub lo: f64,
    pub hi: f64,
    pub lumped_mass: bool,
    pub rve_boundary: RveBoundary,
    pub out: Option<PathBuf>,
    pub workers: usize,
    pub keep_going: bool,
}

impl ExperimentConfig {
    /// Desk-scale defaults for each mode.
    pub fn new(mode: Mode) -> Self {
        let (r_values, lambdas, seeds, k) = match mode {
            Mode::Single => (vec![100], vec![0.1], 1, 3),
            Mode::SweepR => (vec![10, 20, 40, 80, 160], vec![0.1, 0.2, 0.4], 10, 3),
            Mode::SweepLambda => (vec![100], vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5], 10, 3),
            Mode::Histogram => (vec![100], vec![0.1], 100, 3),
            Mode::Rve => (vec![64], vec![], 8, 3),
            Mode::FemVerify => (vec![8], vec![], 1, 3),
        };
        ExperimentConfig {
            mode,
            r_values,
            lambdas,
            seeds,
            base_seed: 0,
            k,
            tol: 1e-9,
            inner_tol: 1e-12,
            inner_solver: InnerSolver::Cholesky,
            max_iter: 50,
            lo: 1.0,
            hi: 9.0,
            lumped_mass: false,
            rve_boundary: RveBoundary::DirichletAffine,
            out: None,
            workers: 1,
            keep_going: false,
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.base_seed.wrapping_add(i)).collect()
    }

    pub fn iteration_config(&self, lambda: f64) -> IterationConfig {
        IterationConfig {
            lambda,
            tol: self.tol,
            max_iter: self.max_iter,
            inner_tol: self.inner_tol,
            inner_solver: self.inner_solver,
            ..IterationConfig::new(lambda)
        }
    }

    /// Checks the configuration and removes duplicate `r` and `λ` values,
    /// keeping first occurrences.
    pub fn normalized(&self) -> Result<Self> {
        let mut cfg = self.clone();
        let mut seen_r = Vec::new();
        cfg.r_values.retain(|r| {
            let fresh = !seen_r.contains(r);
            seen_r.push(*r);
            fresh
        });
        let mut seen_l: Vec<u64> = Vec::new();
        cfg.lambdas.retain(|l| {
            let fresh = !seen_l.contains(&l.to_bits());
            seen_l.push(l.to_bits());
            fresh
        });

        if cfg.r_values.is_empty() || cfg.r_values.contains(&0) {
            return Err(Error::invalid("need a nonempty list of positive r values"));
        }
        if cfg.seeds == 0 {
            return Err(Error::invalid("need at least one seed"));
        }
        if cfg.workers == 0 {
            return Err(Error::invalid("need at least one worker"));
        }
        let iterative = !matches!(cfg.mode, Mode::Rve | Mode::FemVerify);
        if iterative {
            if cfg.lambdas.is_empty() {
                return Err(Error::invalid("need a nonempty list of lambda values"));
            }
            for &l in &cfg.lambdas {
                cfg.iteration_config(l).validate()?;
            }
        }
        match cfg.mode {
            Mode::Single if cfg.r_values.len() != 1 || cfg.lambdas.len() != 1 || cfg.seeds != 1 => {
                return Err(Error::invalid("a single run takes exactly one r, one lambda and one seed"));
            }
            Mode::Histogram if cfg.r_values.len() != 1 || cfg.lambdas.len() != 1 || cfg.seeds < 2 => {
                return Err(Error::invalid("a histogram takes one r, one lambda and at least two seeds"));
            }
            Mode::SweepLambda if cfg.lambdas.iter().any(|&l| l > 0.5) => {
                return Err(Error::invalid("lambda sweeps are limited to (0, 0.5]"));
            }
            Mode::Rve if cfg.r_values.iter().any(|&l| l < 8) => {
                return Err(Error::invalid("RVE blocks need L >= 8"));
            }
            _ => {}
        }
        analytic_abar(cfg.lo, cfg.hi)?;
        Ok(cfg)
    }
}

/// `r < 10 / λ`: the fine-scale solves alone nearly resolve the problem and
/// the measured contraction is better than the asymptotic one.
pub fn is_preasymptotic(r: usize, lambda: f64) -> bool {
    (r as f64) * lambda < 10.0
}

/// Outcome of one `(r, λ, seed)` run.
#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub r: usize,
    pub lambda: f64,
    pub seed: u64,
    pub record: Option<IterationRecord>,
    pub estimate: Option<ContractionEstimate>,
    pub error: Option<String>,
    /// Field sampling, assembly and direct solve, shared by all `λ`.
    pub setup_ms: f64,
    /// Operator preparation and iterations.
    pub wall_ms: f64,
}

impl SeedRun {
    pub fn converged(&self) -> bool {
        self.record.as_ref().is_some_and(IterationRecord::converged)
    }

    pub fn rho(&self) -> Option<f64> {
        self.estimate.map(|e| e.rho)
    }
}

/// Seed statistics of one `(r, λ)` point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub r: usize,
    pub lambda: f64,
    pub summary: Option<ContractionSummary>,
    /// `exp(mean rho)`.
    pub factor_of_mean: Option<f64>,
    /// Mean of per-seed `exp(rho)`.
    pub mean_factor: Option<f64>,
    /// `ℓ(λ)^(1/2) λ^(1/2)`.
    pub predicted: f64,
    pub preasymptotic: bool,
    pub all_converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RveSample {
    pub l: usize,
    pub seed: u64,
    pub abar: HomogenizedMatrix,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RveMean {
    pub l: usize,
    pub abar: [[f64; 2]; 2],
    pub analytic: [[f64; 2]; 2],
}

/// Discretization error of the manufactured problem at one level.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FemLevel {
    pub r: usize,
    pub k: u32,
    pub h1_error: f64,
    pub rel_error: f64,
    /// Error at level `k - 1` divided by the error at level `k`.
    pub ratio: Option<f64>,
    pub wall_ms: f64,
}

/// Acceptable error reduction per refinement for first-order convergence.
pub const FEM_RATIO_RANGE: (f64, f64) = (1.8, 2.2);

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub runs: Vec<SeedRun>,
    pub points: Vec<SweepPoint>,
    pub rve: Vec<RveSample>,
    pub rve_means: Vec<RveMean>,
    pub fem: Vec<FemLevel>,
    pub failures: usize,
}

impl ExperimentReport {
    fn new(config: ExperimentConfig) -> Self {
        ExperimentReport {
            config,
            runs: Vec::new(),
            points: Vec::new(),
            rve: Vec::new(),
            rve_means: Vec::new(),
            fem: Vec::new(),
            failures: 0,
        }
    }

    pub fn point(&self, r: usize, lambda: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.r == r && p.lambda == lambda)
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    schema: &'static str,
    columns: [&'static str; 11],
    report: &'a ExperimentReport,
}

/// Runs the experiment selected by `cfg.mode`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.mode {
        Mode::Single => run_single(cfg),
        Mode::SweepR => run_sweep_r(cfg),
        Mode::SweepLambda => run_sweep_lambda(cfg),
        Mode::Histogram => run_histogram(cfg),
        Mode::Rve => run_rve(cfg),
        Mode::FemVerify => run_fem_verify(cfg),
    }
}

pub fn run_single(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_seeded(cfg, Mode::Single)
}

pub fn run_sweep_r(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_seeded(cfg, Mode::SweepR)
}

pub fn run_sweep_lambda(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_seeded(cfg, Mode::SweepLambda)
}

pub fn run_histogram(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_seeded(cfg, Mode::Histogram)
}

struct Output {
    sink: Option<CsvSink>,
    path: Option<PathBuf>,
}

impl Output {
    fn open(cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<Self> {
        let sink = cfg.out.as_deref().map(CsvSink::create).transpose()?;
        let out = Output {
            sink,
            path: cfg.out.clone(),
        };
        out.metadata(report)?;
        Ok(out)
    }

    fn rows(&mut self, rows: &[ResultRow]) -> Result<()> {
        match &mut self.sink {
            Some(sink) => sink.write_rows(rows),
            None => Ok(()),
        }
    }

    fn metadata(&self, report: &ExperimentReport) -> Result<()> {
        match &self.path {
            Some(path) => output::write_metadata(
                path,
                &Metadata {
                    schema: SCHEMA_VERSION,
                    columns: COLUMNS,
                    report,
                },
            ),
            None => Ok(()),
        }
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// State shared by all seeds of one domain size.
struct SizeContext<'a> {
    cfg: &'a ExperimentConfig,
    mesh: StructuredMesh,
    abar: HomogenizedMatrix,
    homogenized: Mutex<Option<PreparedSolver>>,
}

type LambdaRuns = Vec<(f64, Result<(IterationRecord, f64)>)>;
type TimedLambdaRuns = Vec<(f64, Result<(IterationRecord, f64)>, f64)>;

impl SizeContext<'_> {
    fn homogenized(&self, system: &crate::assembly::FemSystem) -> Result<PreparedSolver> {
        let mut slot = self.homogenized.lock().expect("homogenized solver lock");
        if let Some(s) = slot.as_ref() {
            return Ok(s.clone());
        }
        let solver = self.cfg.iteration_config(self.cfg.lambdas[0]).linear_solver();
        let prepared = PreparedSolver::new(system.a_bar.clone(), &solver)?;
        *slot = Some(prepared.clone());
        Ok(prepared)
    }

    /// All `λ` for one seed; the outer error is a setup failure.
    fn seed_job(&self, seed: u64) -> Result<(LambdaRuns, f64)> {
        let cfg = self.cfg;
        let start = Instant::now();
        let r = self.mesh.r();
        let field = sample_checkerboard(r, seed, cfg.lo, cfg.hi)?;
        let opts = AssemblyOptions {
            lumped_mass: cfg.lumped_mass,
        };
        let system = assemble_with_options(&self.mesh, &field, &self.abar, 1.0, &opts)?;
        let reference = reference_solution(&system)?;
        let homogenized = self.homogenized(&system)?;
        let setup_ms = ms_since(start);

        let runs = cfg
            .lambdas
            .iter()
            .map(|&lambda| {
                let t = Instant::now();
                let config = cfg.iteration_config(lambda);
                let result = StepOperator::with_homogenized(&system, &config, homogenized.clone())
                    .and_then(|op| run_with(&op, &reference, &config, None))
                    .map(|mut record| {
                        record.seed = Some(seed);
                        (record, ms_since(t))
                    });
                (lambda, result)
            })
            .collect();
        Ok((runs, setup_ms))
    }
}

fn iteration_rows(mode: Mode, run: &SeedRun, k: u32) -> Vec<ResultRow> {
    let name = mode.name();
    let mut rows = Vec::new();
    let base = |kind: &str| {
        let mut row = ResultRow::new(kind, run.r, k);
        row.lambda = Some(run.lambda);
        row.seed = Some(run.seed);
        row
    };
    match &run.record {
        Some(record) => {
            let rel = record.relative_errors();
            for (i, (&e, &q)) in record.errors.iter().zip(&rel).enumerate() {
                let mut row = base(name);
                row.iter = Some(i + 1);
                row.h1_error = Some(e);
                row.rel_error = Some(q);
                row.converged = Some(q <= record.config.tol);
                row.wall_ms = if i == 0 { 0.0 } else { record.step_timings[i - 1].total_ms };
                rows.push(row);
            }
            let mut summary = base(&format!("{name}/summary"));
            summary.iter = record.iterations_to_converge;
            summary.h1_error = record.errors.last().copied();
            summary.rel_error = rel.last().copied();
            summary.rho = run.rho();
            summary.converged = Some(record.converged());
            summary.wall_ms = run.wall_ms;
            rows.push(summary);
        }
        None => {
            let mut summary = base(&format!("{name}/summary"));
            summary.converged = Some(false);
            rows.push(summary);
        }
    }
    rows
}

fn aggregate_rows(mode: Mode, point: &SweepPoint, runs: &[&SeedRun], k: u32) -> Vec<ResultRow> {
    let name = mode.name();
    let wall: f64 = runs.iter().map(|r| r.wall_ms).sum();
    let row = |kind: &str, value: Option<f64>| {
        let mut row = ResultRow::new(format!("{name}/{kind}"), point.r, k);
        row.lambda = Some(point.lambda);
        row.rho = value;
        row.converged = Some(point.all_converged);
        row.wall_ms = wall;
        row
    };
    let summary = point.summary.as_ref();
    let mut rows = vec![
        row("mean", summary.map(|s| s.mean)),
        row("std", summary.map(|s| s.std_dev)),
    ];
    if mode == Mode::SweepLambda {
        rows.push(row("exp-mean", point.factor_of_mean));
        rows.push(row("predicted", Some(point.predicted)));
    }
    rows
}

fn run_seeded(cfg: &ExperimentConfig, mode: Mode) -> Result<ExperimentReport> {
    let mut cfg = cfg.normalized()?;
    cfg.mode = mode;
    let cfg = cfg.normalized()?;
    let mut report = ExperimentReport::new(cfg.clone());
    let mut out = Output::open(&cfg, &report)?;
    let pool = if cfg.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::invalid(format!("worker pool: {e}")))?,
        )
    } else {
        None
    };
    let abar = analytic_abar(cfg.lo, cfg.hi)?;
    let seeds = cfg.seed_list();

    for &r in &cfg.r_values {
        for &lambda in &cfg.lambdas {
            if is_preasymptotic(r, lambda) {
                log::info!("r = {r}, lambda = {lambda}: pre-asymptotic regime (r < 10/lambda)");
            }
        }
        let ctx = SizeContext {
            cfg: &cfg,
            mesh: build_mesh(r, cfg.k)?,
            abar,
            homogenized: Mutex::new(None),
        };
        let first_run = report.runs.len();
        for chunk in seeds.chunks(cfg.workers) {
            let results: Vec<Result<(LambdaRuns, f64)>> = match &pool {
                Some(pool) => pool.install(|| chunk.par_iter().map(|&s| ctx.seed_job(s)).collect()),
                None => chunk.iter().map(|&s| ctx.seed_job(s)).collect(),
            };
            for (&seed, result) in chunk.iter().zip(results) {
                let lambda_runs: TimedLambdaRuns = match result {
                    Ok((runs, setup_ms)) => runs.into_iter().map(|(l, res)| (l, res, setup_ms)).collect(),
                    Err(e) if cfg.keep_going => {
                        let msg = e.to_string();
                        cfg.lambdas
                            .iter()
                            .map(|&l| (l, Err(Error::invalid(msg.clone())), 0.0))
                            .collect()
                    }
                    Err(e) => return Err(e),
                };
                let mut rows = Vec::new();
                for (lambda, result, setup_ms) in lambda_runs {
                    let run = match result {
                        Ok((record, wall_ms)) => SeedRun {
                            r,
                            lambda,
                            seed,
                            estimate: estimate_rho(&record, RHO_WINDOW).ok(),
                            record: Some(record),
                            error: None,
                            setup_ms,
                            wall_ms,
                        },
                        Err(e) if cfg.keep_going => {
                            log::error!("r = {r}, lambda = {lambda}, seed = {seed}: {e}");
                            report.failures += 1;
                            SeedRun {
                                r,
                                lambda,
                                seed,
                                record: None,
                                estimate: None,
                                error: Some(e.to_string()),
                                setup_ms,
                                wall_ms: 0.0,
                            }
                        }
                        Err(e) => return Err(e),
                    };
                    log::info!(
                        "r = {r}, lambda = {lambda}, seed = {seed}: rho = {:?}, iterations = {:?}",
                        run.rho(),
                        run.record.as_ref().and_then(|rec| rec.iterations_to_converge)
                    );
                    rows.extend(iteration_rows(mode, &run, cfg.k));
                    report.runs.push(run);
                }
                out.rows(&rows)?;
            }
        }
        // ctx (and with it the homogenized factor) is released here.
        drop(ctx);

        if mode != Mode::Single {
            let mut rows = Vec::new();
            for &lambda in &cfg.lambdas {
                let runs: Vec<&SeedRun> = report.runs[first_run..]
                    .iter()
                    .filter(|run| run.lambda == lambda)
                    .collect();
                let samples: Vec<f64> = runs.iter().filter_map(|run| run.rho()).collect();
                let summary = ContractionSummary::from_samples(samples).ok();
                let point = SweepPoint {
                    r,
                    lambda,
                    factor_of_mean: summary.as_ref().map(ContractionSummary::factor_of_mean),
                    mean_factor: summary.as_ref().map(ContractionSummary::mean_factor),
                    summary,
                    predicted: predicted_factor_shape(lambda)?,
                    preasymptotic: is_preasymptotic(r, lambda),
                    all_converged: runs.iter().all(|run| run.converged()),
                };
                rows.extend(aggregate_rows(mode, &point, &runs, cfg.k));
                report.points.push(point);
            }
            out.rows(&rows)?;
        }
    }
    out.metadata(&report)?;
    Ok(report)
}

/// Estimates the homogenized matrix on `L x L` blocks for every seed.
pub fn run_rve(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut cfg = cfg.normalized()?;
    cfg.mode = Mode::Rve;
    let mut report = ExperimentReport::new(cfg.clone());
    let mut out = Output::open(&cfg, &report)?;
    let analytic = analytic_abar(cfg.lo, cfg.hi)?;
    let opts = RveOptions {
        k: cfg.k,
        boundary: cfg.rve_boundary,
        solver: cfg.iteration_config(1.0).linear_solver(),
    };
    let names = ["a11", "a12", "a21", "a22"];
    let entry = |m: &[[f64; 2]; 2], e: usize| m[e / 2][e % 2];

    for &l in &cfg.r_values {
        let mut sum = [[0.0; 2]; 2];
        let mut count = 0usize;
        for seed in cfg.seed_list() {
            let t = Instant::now();
            let field = sample_checkerboard(l, seed, cfg.lo, cfg.hi)?;
            let estimate = match rve_estimate_abar(&field, &opts) {
                Ok(est) => est,
                Err(e) if cfg.keep_going => {
                    log::error!("rve L = {l}, seed = {seed}: {e}");
                    report.failures += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let wall_ms = ms_since(t);
            let rows: Vec<ResultRow> = (0..4)
                .map(|e| {
                    let mut row = ResultRow::new(format!("rve/{}", names[e]), l, cfg.k);
                    row.seed = Some(seed);
                    row.rho = Some(entry(&estimate.abar, e));
                    row.wall_ms = if e == 0 { wall_ms } else { 0.0 };
                    row
                })
                .collect();
            out.rows(&rows)?;
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += estimate.abar[i][j];
                }
            }
            count += 1;
            report.rve.push(RveSample {
                l,
                seed,
                abar: estimate,
                wall_ms,
            });
        }
        if count == 0 {
            continue;
        }
        let mean = sum.map(|row| row.map(|v| v / count as f64));
        let mut rows = Vec::new();
        for (prefix, m) in [("mean", &mean), ("analytic", &analytic.abar)] {
            for e in 0..4 {
                let mut row = ResultRow::new(format!("rve/{prefix}-{}", names[e]), l, cfg.k);
                row.rho = Some(entry(m, e));
                rows.push(row);
            }
        }
        out.rows(&rows)?;
        report.rve_means.push(RveMean {
            l,
            abar: mean,
            analytic: analytic.abar,
        });
    }
    out.metadata(&report)?;
    Ok(report)
}

/// H1-seminorm discretization error for `a = I` and the manufactured
/// solution `sin(πx/r) sin(πy/r)` on `(0, r)^2` at refinement level `k`.
pub fn manufactured_error(r: usize, k: u32) -> Result<FemLevel> {
    let t = Instant::now();
    let mesh = build_mesh(r, k)?;
    let field = CheckerboardField::constant(r, 1.0)?;
    let identity = HomogenizedMatrix::isotropic(1.0)?;
    let mut system = assemble_with_options(&mesh, &field, &identity, 0.0, &AssemblyOptions::default())?;
    let w = PI / r as f64;
    system.load = load_vector(&mesh, &system.dof_map, |x, y| 2.0 * w * w * (w * x).sin() * (w * y).sin())?;
    let u_h = direct_solve(&system.a_het, &system.load)?;
    let h1_error = h1_error_against(&mesh, &system.dof_map, &u_h, |x, y| {
        [w * (w * x).cos() * (w * y).sin(), w * (w * x).sin() * (w * y).cos()]
    })?;
    // ||grad u||^2 = π^2 / 2 independently of r.
    let exact_norm = PI / 2f64.sqrt();
    Ok(FemLevel {
        r,
        k,
        h1_error,
        rel_error: h1_error / exact_norm,
        ratio: None,
        wall_ms: ms_since(t),
    })
}

/// Manufactured-solution convergence check over levels `1..=k`.
pub fn run_fem_verify(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut cfg = cfg.normalized()?;
    cfg.mode = Mode::FemVerify;
    let mut report = ExperimentReport::new(cfg.clone());
    let mut out = Output::open(&cfg, &report)?;
    for &r in &cfg.r_values {
        let mut previous: Option<f64> = None;
        for k in 1..=cfg.k.max(1) {
            let mut level = manufactured_error(r, k)?;
            level.ratio = previous.map(|p| p / level.h1_error);
            previous = Some(level.h1_error);
            let mut row = ResultRow::new(Mode::FemVerify.name(), r, k);
            row.h1_error = Some(level.h1_error);
            row.rel_error = Some(level.rel_error);
            row.rho = level.ratio;
            row.converged = level
                .ratio
                .map(|q| (FEM_RATIO_RANGE.0..=FEM_RATIO_RANGE.1).contains(&q));
            row.wall_ms = level.wall_ms;
            out.rows(&[row])?;
            report.fem.push(level);
        }
    }
    out.metadata(&report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: Mode) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(mode);
        cfg.r_values = vec![6];
        cfg.lambdas = vec![0.5];
        cfg.k = 1;
        cfg.seeds = if mode == Mode::Single { 1 } else { 3 };
        cfg
    }

    #[test]
    fn validation() {
        let mut cfg = small(Mode::SweepR);
        cfg.seeds = 0;
        assert!(cfg.normalized().is_err());
        let mut cfg = small(Mode::SweepR);
        cfg.r_values.clear();
        assert!(cfg.normalized().is_err());
        let mut cfg = small(Mode::SweepLambda);
        cfg.lambdas = vec![0.2, 0.1, 0.2, 0.1];
        assert_eq!(cfg.normalized().unwrap().lambdas, vec![0.2, 0.1]);
        cfg.lambdas = vec![0.6];
        assert!(cfg.normalized().is_err());
        let mut cfg = small(Mode::Histogram);
        cfg.seeds = 1;
        assert!(cfg.normalized().is_err());
        let mut cfg = small(Mode::Single);
        cfg.lambdas = vec![0.1, 0.2];
        assert!(cfg.normalized().is_err());
    }

    #[test]
    fn preasymptotic_flag() {
        assert!(is_preasymptotic(100, 0.05));
        assert!(!is_preasymptotic(100, 0.1));
        assert!(!is_preasymptotic(50, 0.4));
    }

    #[test]
    fn seeds_are_offsets_of_base() {
        let mut cfg = small(Mode::SweepR);
        cfg.base_seed = 40;
        assert_eq!(cfg.seed_list(), vec![40, 41, 42]);
    }

    #[test]
    fn sweep_produces_points_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(Mode::SweepR);
        cfg.r_values = vec![6, 8];
        cfg.out = Some(dir.path().join("sweep.csv"));
        let report = run_sweep_r(&cfg).unwrap();
        assert_eq!(report.runs.len(), 6);
        assert_eq!(report.points.len(), 2);
        assert!(report.runs.iter().all(SeedRun::converged));
        let rows = read_rows(cfg.out.as_ref().unwrap()).unwrap();
        assert_eq!(rows.iter().filter(|r| r.mode == "sweep-r/summary").count(), 6);
        assert_eq!(rows.iter().filter(|r| r.mode == "sweep-r/mean").count(), 2);
        assert!(metadata_path(cfg.out.as_ref().unwrap()).exists());
    }

    #[test]
    fn workers_do_not_change_results() {
        let mut cfg = small(Mode::Histogram);
        cfg.seeds = 4;
        let serial = run_histogram(&cfg).unwrap();
        cfg.workers = 2;
        let parallel = run_histogram(&cfg).unwrap();
        for (a, b) in serial.runs.iter().zip(&parallel.runs) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.record.as_ref().unwrap().errors, b.record.as_ref().unwrap().errors);
        }
    }

    #[test]
    fn failures_abort_or_are_recorded() {
        let mut cfg = small(Mode::SweepR);
        cfg.inner_solver = InnerSolver::Cg;
        // An unreachable inner tolerance fails every run.
        let mut starved = cfg.clone();
        starved.inner_tol = f64::MIN_POSITIVE;
        let err = run_sweep_r(&starved);
        assert!(err.is_err());
        starved.keep_going = true;
        let report = run_sweep_r(&starved).unwrap();
        assert_eq!(report.failures, 3);
        assert!(report.runs.iter().all(|r| r.error.is_some()));
    }

    #[test]
    fn manufactured_convergence_is_first_order() {
        let coarse = manufactured_error(4, 2).unwrap();
        let fine = manufactured_error(4, 3).unwrap();
        let ratio = coarse.h1_error / fine.h1_error;
        assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
    }
}
