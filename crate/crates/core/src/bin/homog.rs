use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use homog::coeff::RveBoundary;
use homog::experiments::{run_experiment, ExperimentConfig, ExperimentReport, Mode};
use homog::iteration::InnerSolver;

#[derive(Parser)]
#[command(name = "homog", version, about = "Homogenization-based iterative solver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One run at a single (r, lambda, seed).
    Run(Common),
    /// Contraction factor against the domain size.
    SweepR(Common),
    /// Contraction factor against lambda.
    SweepLambda(Common),
    /// Contraction factors over many seeds at one (r, lambda).
    Histogram(Common),
    /// Homogenized matrix estimated on L x L blocks (L given by --r).
    Rve(Common),
    /// Discretization error of a manufactured solution over refinement levels.
    FemVerify(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Boundary {
    Dirichlet,
    Periodic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Inner {
    Cholesky,
    Cg,
    CgJacobi,
}

#[derive(Args)]
struct Common {
    /// Domain size(s); repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    r: Vec<usize>,
    /// Lambda value(s); repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Number of seeds, taken as base-seed, base-seed + 1, ...
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Refinement level per unit cell.
    #[arg(long)]
    refine: Option<u32>,
    /// Outer tolerance on the relative H1 error.
    #[arg(long)]
    tol: Option<f64>,
    /// Relative residual tolerance of iterative inner solves.
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long, value_enum)]
    inner_solver: Option<Inner>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    lumped_mass: bool,
    #[arg(long, value_enum)]
    boundary: Option<Boundary>,
    /// Results CSV; a JSON metadata file is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Record failed runs and continue instead of aborting.
    #[arg(long)]
    keep_going: bool,
}

impl Common {
    fn into_config(self, mode: Mode) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(mode);
        if !self.r.is_empty() {
            cfg.r_values = self.r;
        }
        if !self.lambda.is_empty() {
            cfg.lambdas = self.lambda;
        }
        if let Some(s) = self.seeds {
            cfg.seeds = s;
        }
        cfg.base_seed = self.base_seed;
        if let Some(k) = self.refine {
            cfg.k = k;
        }
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(t) = self.inner_tol {
            cfg.inner_tol = t;
        }
        if let Some(inner) = self.inner_solver {
            cfg.inner_solver = match inner {
                Inner::Cholesky => InnerSolver::Cholesky,
                Inner::Cg => InnerSolver::Cg,
                Inner::CgJacobi => InnerSolver::CgJacobi,
            };
        }
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        cfg.lumped_mass = self.lumped_mass;
        if let Some(b) = self.boundary {
            cfg.rve_boundary = match b {
                Boundary::Dirichlet => RveBoundary::DirichletAffine,
                Boundary::Periodic => RveBoundary::Periodic,
            };
        }
        cfg.out = self.out;
        cfg.workers = self.workers;
        cfg.keep_going = self.keep_going;
        cfg
    }
}

fn print_summary(report: &ExperimentReport) {
    for run in &report.runs {
        match (&run.record, run.estimate) {
            (Some(rec), Some(est)) => println!(
                "r={} lambda={} seed={} iterations={} rho={:.4} factor={:.4}",
                run.r,
                run.lambda,
                run.seed,
                rec.iterations_to_converge.map_or("-".to_string(), |i| i.to_string()),
                est.rho,
                est.factor()
            ),
            _ => println!(
                "r={} lambda={} seed={} failed: {}",
                run.r,
                run.lambda,
                run.seed,
                run.error.as_deref().unwrap_or("no contraction estimate")
            ),
        }
    }
    for p in &report.points {
        if let Some(s) = &p.summary {
            println!(
                "r={} lambda={} seeds={} mean rho={:.4} std={:.4} exp(mean)={:.4} predicted shape={:.4}{}",
                p.r,
                p.lambda,
                s.samples.len(),
                s.mean,
                s.std_dev,
                s.factor_of_mean(),
                p.predicted,
                if p.preasymptotic { " (pre-asymptotic)" } else { "" }
            );
        }
    }
    for s in &report.rve {
        println!("L={} seed={} abar={:?}", s.l, s.seed, s.abar.abar);
    }
    for m in &report.rve_means {
        println!("L={} mean abar={:?} analytic={:?}", m.l, m.abar, m.analytic);
    }
    for f in &report.fem {
        println!(
            "r={} k={} h1 error={:.6e} ratio={}",
            f.r,
            f.k,
            f.h1_error,
            f.ratio.map_or("-".to_string(), |q| format!("{q:.3}"))
        );
    }
    if report.failures > 0 {
        println!("{} run(s) failed", report.failures);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::Run(c) => (Mode::Single, c),
        Command::SweepR(c) => (Mode::SweepR, c),
        Command::SweepLambda(c) => (Mode::SweepLambda, c),
        Command::Histogram(c) => (Mode::Histogram, c),
        Command::Rve(c) => (Mode::Rve, c),
        Command::FemVerify(c) => (Mode::FemVerify, c),
    };
    match run_experiment(&common.into_config(mode)) {
        Ok(report) => {
            print_summary(&report);
            if report.failures > 0 {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
