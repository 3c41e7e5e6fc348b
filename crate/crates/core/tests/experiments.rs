use homog::experiments::{
    metadata_path, read_rows, run_experiment, run_fem_verify, run_histogram, run_rve, ExperimentConfig, Mode, ResultRow,
};

fn small(mode: Mode, dir: &std::path::Path, name: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(mode);
    cfg.r_values = vec![8];
    cfg.lambdas = vec![0.5];
    cfg.k = 2;
    cfg.seeds = if mode == Mode::Single { 1 } else { 3 };
    cfg.out = Some(dir.join(name));
    cfg
}

fn without_timing(rows: Vec<ResultRow>) -> Vec<ResultRow> {
    rows.into_iter().map(|r| ResultRow { wall_ms: 0.0, ..r }).collect()
}

#[test]
fn same_seeds_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Mode::SweepLambda, dir.path(), "a.csv");
    cfg.lambdas = vec![0.25, 0.5];
    run_experiment(&cfg).unwrap();
    cfg.out = Some(dir.path().join("b.csv"));
    cfg.workers = 2;
    run_experiment(&cfg).unwrap();
    let a = without_timing(read_rows(&dir.path().join("a.csv")).unwrap());
    let b = without_timing(read_rows(&dir.path().join("b.csv")).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
    for kind in ["sweep-lambda/mean", "sweep-lambda/std", "sweep-lambda/exp-mean", "sweep-lambda/predicted"] {
        assert_eq!(a.iter().filter(|r| r.mode == kind).count(), 2, "{kind}");
    }
}

#[test]
fn single_run_rows_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Mode::Single, dir.path(), "run.csv");
    let report = run_experiment(&cfg).unwrap();
    let rows = read_rows(cfg.out.as_ref().unwrap()).unwrap();
    let iterations: Vec<&ResultRow> = rows.iter().filter(|r| r.mode == "run").collect();
    let summary: Vec<&ResultRow> = rows.iter().filter(|r| r.mode == "run/summary").collect();
    assert_eq!(summary.len(), 1);
    assert_eq!(iterations.len(), report.runs[0].record.as_ref().unwrap().errors.len());
    assert_eq!(iterations[0].rel_error, Some(1.0));
    assert!(iterations.windows(2).all(|w| w[1].h1_error < w[0].h1_error));
    assert_eq!(summary[0].converged, Some(true));
    assert!(summary[0].rho.unwrap() < 0.0);

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(metadata_path(cfg.out.as_ref().unwrap())).unwrap()).unwrap();
    assert_eq!(meta["schema"], "homog-results/1");
    assert_eq!(meta["report"]["config"]["mode"], "single");
    assert_eq!(meta["report"]["runs"].as_array().unwrap().len(), 1);
}

#[test]
fn invalid_configurations_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Mode::SweepR, dir.path(), "x.csv");
    cfg.seeds = 0;
    assert!(run_experiment(&cfg).is_err());
    let mut cfg = small(Mode::SweepR, dir.path(), "x.csv");
    cfg.lambdas.clear();
    assert!(run_experiment(&cfg).is_err());
    let mut cfg = small(Mode::SweepR, dir.path(), "x.csv");
    cfg.lambdas = vec![0.0];
    assert!(run_experiment(&cfg).is_err());
}

#[test]
fn duplicate_lambdas_run_once() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Mode::SweepLambda, dir.path(), "dup.csv");
    cfg.lambdas = vec![0.5, 0.25, 0.5];
    cfg.seeds = 1;
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.points.len(), 2);
    assert_eq!(report.runs.len(), 2);
}

#[test]
fn histogram_over_ten_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Mode::Histogram, dir.path(), "hist.csv");
    cfg.seeds = 10;
    cfg.base_seed = 100;
    let report = run_histogram(&cfg).unwrap();
    let seeds: Vec<u64> = report.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, (100..110).collect::<Vec<_>>());
    let summary = report.points[0].summary.as_ref().unwrap();
    assert_eq!(summary.samples.len(), 10);
    assert!(summary.std_dev > 0.0);
    assert!(summary.factor_of_mean() < 0.5);
}

#[test]
fn rve_and_fem_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Mode::Rve, dir.path(), "rve.csv");
    cfg.r_values = vec![16];
    cfg.seeds = 2;
    cfg.k = 1;
    let report = run_rve(&cfg).unwrap();
    assert_eq!(report.rve.len(), 2);
    let rows = read_rows(cfg.out.as_ref().unwrap()).unwrap();
    assert_eq!(rows.iter().filter(|r| ["rve/a11", "rve/a12", "rve/a21", "rve/a22"].contains(&r.mode.as_str())).count(), 8);
    assert_eq!(rows.iter().find(|r| r.mode == "rve/analytic-a11").unwrap().rho, Some(3.0));

    let mut cfg = small(Mode::FemVerify, dir.path(), "fem.csv");
    cfg.r_values = vec![4];
    cfg.k = 3;
    let report = run_fem_verify(&cfg).unwrap();
    assert_eq!(report.fem.len(), 3);
    let last = report.fem.last().unwrap();
    assert!((1.8..=2.2).contains(&last.ratio.unwrap()));
    let rows = read_rows(cfg.out.as_ref().unwrap()).unwrap();
    assert_eq!(rows.last().unwrap().converged, Some(true));
}
