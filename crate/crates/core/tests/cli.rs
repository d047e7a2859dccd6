use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use driftcl::cli::diagnose::{interference_diagnostics, run_diagnostics};
use driftcl::cli::{
    emit_comparison, parse_config, run_dir, run_experiment, run_sweep, sweep_dir, RunConfig, RunSummary,
    COMPARISON_FILE, EVENTS_FILE, MATRIX_FILE, SUMMARY_FILE,
};
use driftcl::metrics::AccuracyMatrix;
use driftcl::streams::build_stream;
use driftcl::trainer::{DriftEventRecord, StrategyKind};
use driftcl::Error;

fn small_config(out: &Path, extra: &str) -> RunConfig {
    let text = format!(
        "[stream]\ndataset = synthetic\ntasks = 4\nclasses_per_task = 2\ndrift_tasks = 2\n\
         train_per_class = 120\ntest_per_class = 40\n[model]\nhidden = 32\n\
         [train]\nbuffer = 80\nepochs = 2\n[detector]\nmin_samples = 10\n[run]\noutput_dir = {}\n{extra}",
        out.display()
    );
    parse_config(&text, "small.ini").unwrap()
}

fn files_in(dir: &Path) -> BTreeSet<String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect()
}

#[test]
fn run_writes_exactly_the_declared_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let summary = run_experiment(&cfg).unwrap();
    let dir = run_dir(&cfg);
    assert_eq!(
        files_in(&dir),
        [EVENTS_FILE, MATRIX_FILE, SUMMARY_FILE]
            .iter()
            .map(|s| s.to_string())
            .collect()
    );

    let csv = fs::read_to_string(dir.join(MATRIX_FILE)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("task_0,task_1,task_2,task_3"));
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 4);
        assert!(cells[..=i].iter().all(|c| !c.is_empty()));
        assert!(cells[i + 1..].iter().all(|c| c.is_empty()));
    }
    let m = AccuracyMatrix::from_csv(&csv).unwrap();
    assert!(m.is_complete());

    let parsed: RunSummary = serde_json::from_str(&fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(parsed, summary);
    assert_eq!(parse_config(&parsed.config, "summary").unwrap(), cfg);

    let events: Vec<DriftEventRecord> = fs::read_to_string(dir.join(EVENTS_FILE))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(events, summary.detections);
    assert_eq!(events.len(), 4, "classes 0..4 recur at task 2");
    let labels: u64 = events.iter().map(|e| e.labels).sum();
    assert_eq!(labels, summary.ledger.adaptation_labels);
}

#[test]
fn snapshots_are_written_per_task() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "snapshots = true\n");
    run_experiment(&cfg).unwrap();
    let snaps = files_in(&run_dir(&cfg).join("snapshots"));
    assert_eq!(snaps.len(), 4);
    let last = fs::read_to_string(run_dir(&cfg).join("snapshots/buffer_task_3.jsonl")).unwrap();
    assert_eq!(last.lines().count(), 80);
}

#[test]
fn same_config_and_seed_give_identical_matrices() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&small_config(a.path(), "seed = 3\n")).unwrap();
    run_experiment(&small_config(b.path(), "seed = 3\n")).unwrap();
    let read = |p: &Path| fs::read(run_dir(&small_config(p, "seed = 3\n")).join(MATRIX_FILE)).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn sweep_reports_and_normalizes_against_fr() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "workers = 2\n");
    cfg.trainer.epochs = 1;
    let report = run_sweep(&cfg, &[0, 1], &StrategyKind::ALL).unwrap();
    assert_eq!(report.runs.len(), 6);
    for r in &report.runs {
        let n = r.normalized.expect("every run has an FR baseline");
        if r.strategy == StrategyKind::FullRelearning {
            assert_eq!(n.labels, Some(1.0));
            assert_eq!(n.flops, 1.0);
            assert_eq!(n.wall_time, 1.0);
        }
        if r.strategy == StrategyKind::Vanilla {
            assert_eq!(r.ledger.adaptation_labels, 0);
            assert_eq!(n.labels, Some(0.0));
        }
        let on_disk: RunSummary =
            serde_json::from_str(&fs::read_to_string(tmp.path().join(&r.run_id).join(SUMMARY_FILE)).unwrap()).unwrap();
        assert_eq!(&on_disk, r);
    }
    let amr = report
        .strategies
        .iter()
        .find(|a| a.strategy == StrategyKind::Amr)
        .unwrap();
    let faas: Vec<f64> = report
        .runs
        .iter()
        .filter(|r| r.strategy == StrategyKind::Amr)
        .map(|r| r.faa)
        .collect();
    assert!((amr.faa.mean - (faas[0] + faas[1]) / 2.0).abs() < 1e-12);
    assert!((amr.faa.std - (faas[0] - faas[1]).abs() / 2f64.sqrt()).abs() < 1e-12);

    let csv = fs::read_to_string(sweep_dir(&cfg).join(COMPARISON_FILE)).unwrap();
    let fr_row = csv.lines().find(|l| l.starts_with("fr,")).unwrap();
    let cells: Vec<&str> = fr_row.split(',').collect();
    assert_eq!(&cells[9..], &["1", "1", "1", "1", "1"]);
    let vanilla_row = csv.lines().find(|l| l.starts_with("vanilla,")).unwrap();
    assert_eq!(vanilla_row.split(',').nth(6), Some("0"));
}

#[test]
fn comparison_rejects_mixed_streams() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small_config(tmp.path(), "");
    let mut b = a.clone();
    b.severity = 3;
    b.strategy = StrategyKind::FullRelearning;
    let ra = run_experiment(&a).unwrap();
    let rb = run_experiment(&b).unwrap();
    assert!(matches!(
        emit_comparison(&[ra.clone(), rb]),
        Err(Error::IncompatibleRuns(_))
    ));
    assert!(matches!(emit_comparison(&[ra]), Err(Error::IncompatibleRuns(_))));
}

#[test]
fn drifted_gradients_disagree_more_than_undrifted_ones() {
    // Default synthetic scenario, five seeds.
    let mut gaps = Vec::new();
    for seed in 0..5 {
        let mut cfg = parse_config(
            "[stream]\ndataset = synthetic\ntasks = 5\nclasses_per_task = 2\ndrift_tasks = 3\n[train]\nbuffer = 200\n",
            "x",
        )
        .unwrap();
        cfg.seed = seed;
        let stream = build_stream(&cfg.stream_config()).unwrap();
        for c in interference_diagnostics(&cfg, &stream).unwrap() {
            assert!(c.drifted.non_decreasing && c.control.non_decreasing);
            gaps.push(1.0 - c.drifted.cosine_sim.unwrap());
        }
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!(mean >= 0.2, "mean similarity gap {mean}");
}

#[test]
fn diagnostics_report_is_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let r = run_diagnostics(&cfg).unwrap();
    assert_eq!(r.replacement.len(), 3);
    assert_eq!(r.interference.len(), 4);
    assert!(r.random_pairs.all_non_decreasing);
    let json = serde_json::to_value(&r).unwrap();
    assert!(json["replacement"][1]["closed_form"]["expected_replaced"].is_number());
}

fn driftcl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_driftcl")).args(args).output().unwrap()
}

#[test]
fn binary_exit_codes_follow_error_categories() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.ini");
    fs::write(
        &bad,
        "[stream]\ndataset = synthetic\ntasks = 5\nclasses_per_task = 2\nseverity = 6\n",
    )
    .unwrap();
    let out = driftcl(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 5") && stderr.contains("severity"), "{stderr}");

    let fm = tmp.path().join("fm.ini");
    fs::write(
        &fm,
        format!(
            "[stream]\ndataset = fashion_mnist\ndata_dir = {}\ntasks = 5\nclasses_per_task = 2\n",
            tmp.path().join("nowhere").display()
        ),
    )
    .unwrap();
    assert_eq!(driftcl(&["run", fm.to_str().unwrap()]).status.code(), Some(4));
    assert_eq!(driftcl(&["run", "/no/such/config.ini"]).status.code(), Some(5));
}

#[test]
fn binary_run_and_verify_succeed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("ok.ini");
    let cfg = small_config(tmp.path(), "");
    fs::write(&cfg_path, driftcl::cli::render_config(&cfg)).unwrap();
    let out = driftcl(&["run", cfg_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run_dir(&cfg).join(SUMMARY_FILE).is_file());

    let out = driftcl(&["verify"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("PASS").count(), 7);
}
