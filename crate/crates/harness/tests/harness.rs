use std::fs;
use std::path::Path;
use std::process::Command;

use simplex_sparse::aggregate::{read_summary, summarize, write_summary};
use simplex_sparse::config::PlotKind;
use simplex_sparse::record::{TrialKey, TrialRecord};
use simplex_sparse::{aggregate, collect_records, emit_plot_data, run_experiment, Experiment, ExperimentConfig, HarnessError, Overrides};

fn config(exp: Experiment, text: &str, out: &Path) -> ExperimentConfig {
    let overrides = Overrides { out: Some(out.to_path_buf()), ..Default::default() };
    ExperimentConfig::parse(exp, text, &overrides).unwrap()
}

fn toy(method: &str, grid: usize, n: usize, l2: f64, recovered: bool) -> TrialRecord {
    let key = TrialKey { experiment: "cs", grid, n, p_or_m: 10, s_or_r: 2, trial: 0, seed: 1 };
    let mut r = key.record(method);
    r.set_errors(l2, if recovered { 1e-4 } else { 0.5 });
    r.mcc = Some(if recovered { 1.0 } else { 0.5 });
    r.rank_or_support_size = if recovered { 2 } else { 3 };
    r.converged = true;
    r
}

#[test]
fn zero_trials_give_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(Experiment::Cs, "trials = 0\nplots = error_curve", dir.path())).unwrap();
    assert_eq!(out.records, 0);
    assert_eq!(fs::read_to_string(&out.results).unwrap(), "");
    let summary = fs::read_to_string(&out.summary).unwrap();
    assert_eq!(summary.lines().count(), 1);
    assert!(summary.starts_with("experiment,method,grid,"));
    assert_eq!(fs::read_to_string(&out.plots[0]).unwrap().lines().count(), 1);
}

#[test]
fn cs_counting_contract() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Experiment::Cs, "p = 100\ns_grid = 10\nc_grid = 2.0\ntrials = 2\nmethods = feasible,l2", dir.path());
    let out = run_experiment(&cfg).unwrap();
    let recs = simplex_sparse::read_records(&out.results).unwrap();
    assert_eq!(recs.len(), 4);
    let order: Vec<(usize, &str)> = recs.iter().map(|r| (r.trial, r.method.as_str())).collect();
    assert_eq!(order, vec![(0, "feasible"), (0, "l2"), (1, "feasible"), (1, "l2")]);
    // n = ceil(2 * 10 * log 10).
    assert!(recs.iter().all(|r| r.n == 47 && r.p_or_m == 100 && r.s_or_r == 10));
    assert!(recs.iter().all(|r| r.runtime_ms.is_none()));
    assert!(recs.iter().all(|r| !r.recovered || r.linf_error.unwrap() <= 1e-3));
}

#[test]
fn denoise_vec_recovers_every_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Experiment::Denoise, "mode = vec\nn_grid = 20,40\ns = 3\ntrials = 10", dir.path());
    let recs = collect_records(&cfg).unwrap();
    let closed: Vec<&TrialRecord> = recs.iter().filter(|r| r.method == "l2_closed_form").collect();
    assert_eq!(closed.len(), 20);
    for r in closed {
        assert!(r.recovered, "{r:?}");
        assert_eq!(r.mcc, Some(1.0));
    }
    // Larger noise still recovers the support, not the values.
    let cfg = config(Experiment::Denoise, "mode = vec\nn_grid = 30\ns = 2\neps = 0.05\ntrials = 10", dir.path());
    for r in collect_records(&cfg).unwrap() {
        assert_eq!(r.mcc, Some(1.0), "{r:?}");
    }
}

#[test]
fn runtime_is_recorded_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Experiment::Denoise, "mode = mat\nn_grid = 4\ntrials = 1\nrecord_runtime = true", dir.path());
    assert!(collect_records(&cfg).unwrap().iter().all(|r| r.runtime_ms.is_some_and(|t| t >= 0.0)));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = "p = 30\ns_grid = 3\nc_grid = 1.5,2\ntrials = 3";
    let mut bytes = Vec::new();
    for workers in [1, 3] {
        let overrides = Overrides { workers: Some(workers), out: Some(dir.path().join(workers.to_string())), ..Default::default() };
        let out = run_experiment(&ExperimentConfig::parse(Experiment::Cs, text, &overrides).unwrap()).unwrap();
        bytes.push(fs::read(out.results).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn aggregate_examples() {
    let single = summarize(&[toy("l2", 0, 20, 0.3, true)]);
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].count, 1);
    assert_eq!(single[0].mean_l2, Some(0.3));
    assert_eq!(single[0].median_l2, Some(0.3));
    assert_eq!(single[0].se_l2, None);

    let twins = summarize(&[toy("l2", 0, 20, 0.3, true), toy("l2", 0, 20, 0.3, true)]);
    assert_eq!(twins[0].se_l2, Some(0.0));

    // Hand-computed: l2 errors {0.1, 0.2, 0.6} -> mean 0.3, median 0.2,
    // sd sqrt(0.07), se sqrt(0.07 / 3); two of three recovered.
    let recs = vec![
        toy("l2", 1, 40, 0.1, true),
        toy("feasible", 0, 20, 1.0, false),
        toy("l2", 1, 40, 0.6, false),
        toy("l2", 1, 40, 0.2, true),
        toy("l2", 0, 20, 0.5, false),
    ];
    let rows = summarize(&recs);
    let keys: Vec<(&str, usize)> = rows.iter().map(|r| (r.method.as_str(), r.grid)).collect();
    assert_eq!(keys, vec![("feasible", 0), ("l2", 0), ("l2", 1)]);
    let r = &rows[2];
    assert!((r.mean_l2.unwrap() - 0.3).abs() < 1e-15);
    assert_eq!(r.median_l2, Some(0.2));
    assert!((r.se_l2.unwrap() - (0.07f64 / 3.0).sqrt()).abs() < 1e-15);
    assert!((r.recovery_fraction - 2.0 / 3.0).abs() < 1e-15);
    assert!((r.mean_mcc.unwrap() - 2.5 / 3.0).abs() < 1e-15);
    assert!((r.rank_detection - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(r.converged_fraction, 1.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.csv");
    write_summary(&rows, &path).unwrap();
    assert_eq!(read_summary(&path).unwrap(), rows);
}

#[test]
fn malformed_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.jsonl");
    let good = serde_json::to_string(&toy("l2", 0, 20, 0.1, true)).unwrap();
    fs::write(&path, format!("{good}\n{good}\n{{\"experiment\": 3}}\n")).unwrap();
    match aggregate(&path) {
        Err(HarnessError::Malformed { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(aggregate(&dir.path().join("missing.jsonl")), Err(HarnessError::Io { .. })));
}

#[test]
fn plot_data_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.csv");
    let recs = vec![
        toy("l2", 0, 20, 0.5, false),
        toy("l2", 1, 40, 0.1, true),
        toy("feasible", 0, 20, 0.9, false),
        toy("feasible", 1, 40, 0.4, false),
    ];
    write_summary(&summarize(&recs), &summary).unwrap();

    let curve = dir.path().join("curve.csv");
    assert_eq!(emit_plot_data(&summary, PlotKind::ErrorCurve, &curve).unwrap(), 4);
    let text = fs::read_to_string(&curve).unwrap();
    assert_eq!(text.lines().next(), Some("x,y,series"));
    assert_eq!(text.lines().filter(|l| l.ends_with("l2 s=2")).count(), 2);
    assert!(text.contains("40,0.1,l2 s=2"));

    let contour = dir.path().join("contour.csv");
    assert_eq!(emit_plot_data(&summary, PlotKind::Contour, &contour).unwrap(), 4);
    let text = fs::read_to_string(&contour).unwrap();
    assert_eq!(text.lines().next(), Some("x,y,series,level"));
    assert!(text.contains("40,2,l2,1"));

    // Portfolio rows: one per path point, x = weight norm, y = Sharpe ratio.
    let key = TrialKey { experiment: "portfolio", grid: 0, n: 20, p_or_m: 3, s_or_r: 0, trial: 0, seed: 0 };
    let mut a = key.record("l2_erm");
    (a.hyperparameter, a.tau, a.norm_l2, a.sharpe) = (Some(0.1), Some(1e-4), Some(0.7), Some(0.25));
    let mut b = a.clone();
    (b.hyperparameter, b.norm_l2, b.sharpe) = (Some(0.2), Some(1.0), Some(0.1));
    write_summary(&summarize(&[a, b]), &summary).unwrap();
    let sharpe = dir.path().join("sharpe.csv");
    assert_eq!(emit_plot_data(&summary, PlotKind::SharpeCurve, &sharpe).unwrap(), 2);
    let text = fs::read_to_string(&sharpe).unwrap();
    assert!(text.contains("0.7,0.25,l2_erm tau=0.0001"));
    assert!(text.contains("1,0.1,l2_erm tau=0.0001"));

    assert!(matches!("scatter".parse::<PlotKind>(), Err(HarnessError::Config(_))));
}

fn returns_csv(path: &Path, weeks: usize) {
    let mut text = String::from("AAA,BBB,CCC,DDD\n");
    for w in 0..weeks {
        let t = w as f64;
        let row = [0.01 * (t * 0.7).sin(), 0.004 + 0.02 * (t * 1.3).cos(), 0.002 * (t * 0.3).sin() + 0.003, -0.01 * (t * 2.1).sin()];
        text.push_str(&row.map(|v| format!("{v:.6}")).join(","));
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn portfolio_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("returns.csv");
    returns_csv(&csv, 40);
    let text = format!(
        "csv_path = {}\nestimation_weeks = 30\ntau = 0.0001,0.005\nl2_points = 5\nwl1_points = 4\nmax_sparsity = 3\nplots = sharpe_curve",
        csv.display()
    );
    let out = run_experiment(&config(Experiment::Portfolio, &text, &dir.path().join("out"))).unwrap();
    let recs = simplex_sparse::read_records(&out.results).unwrap();
    // Path methods give the same count per tau; threshold candidates depend on the pilot.
    assert!(recs.iter().all(|r| r.tau == Some(0.0001) || r.tau == Some(0.005)));
    assert_eq!(recs.iter().filter(|r| r.method == "l2_erm" && r.tau == Some(0.005)).count(), 5);
    assert_eq!(recs.iter().filter(|r| r.method == "l2_erm").count(), 10);
    assert_eq!(recs.iter().filter(|r| r.method == "iht").count(), 6);
    for r in &recs {
        assert!(r.error.is_none(), "{r:?}");
        assert!(r.l2_error.is_none() && !r.recovered);
        assert!(r.norm_l2.unwrap() <= 1.0 + 1e-12 && r.norm_l2.unwrap() >= 0.5 - 1e-12);
        assert!(r.sharpe.is_some());
    }
    // The largest penalty of the path sits at a vertex.
    let top = recs.iter().rfind(|r| r.method == "l2_erm" && r.tau == Some(0.0001)).unwrap();
    assert_eq!(top.rank_or_support_size, 1);
    let summary = read_summary(&out.summary).unwrap();
    assert_eq!(summary.iter().filter(|r| r.method == "iht").count(), 6);
    assert!(fs::read_to_string(&out.plots[0]).unwrap().lines().count() > 10);
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_simplex-sparse")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.cfg");
    fs::write(&good, "p = 20\ns_grid = 2\nc_grid = 2\nmethods = feasible\n").unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "p = 20\nlambda = 3\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = out_dir.to_str().unwrap();

    let ok = cli(&["cs", "--config", good.to_str().unwrap(), "--out", out, "--trials", "1", "--seed", "3", "--workers", "1"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(fs::read_to_string(out_dir.join("results.jsonl")).unwrap().lines().count(), 1);
    assert!(out_dir.join("summary.csv").exists());

    assert_eq!(cli(&["cs", "--config", bad.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    assert_eq!(cli(&["lasso", "--config", good.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(cli(&["cs"]).status.code(), Some(2));
    let missing = dir.path().join("missing.cfg");
    assert_eq!(cli(&["cs", "--config", missing.to_str().unwrap()]).status.code(), Some(3));

    let pf = dir.path().join("pf.cfg");
    fs::write(&pf, format!("csv_path = {}\n", dir.path().join("nope.csv").display())).unwrap();
    assert_eq!(cli(&["portfolio", "--config", pf.to_str().unwrap(), "--out", out]).status.code(), Some(3));
}
