//! Experiment plumbing behind the `driftcl` binary: config files, seeded runs
//! with on-disk artifacts, multi-seed sweeps and comparison tables.

mod config;
pub mod diagnose;
pub mod verify;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{faa, forgetting, per_task_forgetting};
use crate::streams::{build_stream, TaskStream};
use crate::trainer::{run_stream_with, CostLedger, DriftEventRecord, RunOutput, StrategyKind};

pub use config::{parse_config, render_config, DatasetKind, RunConfig, DATA_DIR_ENV};

pub const MATRIX_FILE: &str = "accuracy_matrix.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const COMPARISON_FILE: &str = "comparison.csv";

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

/// Costs divided by the matching cost of an FR baseline run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCosts {
    pub labels: Option<f64>,
    pub flops: f64,
    pub wall_time: f64,
}

impl NormalizedCosts {
    fn relative(ledger: &CostLedger, base: &CostLedger) -> Self {
        let ratio = |a: f64, b: f64| {
            if b > 0.0 {
                a / b
            } else if a == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        };
        Self {
            labels: (base.adaptation_labels > 0)
                .then(|| ledger.adaptation_labels as f64 / base.adaptation_labels as f64),
            flops: ratio(ledger.flops as f64, base.flops as f64),
            wall_time: ratio(ledger.wall_time_secs, base.wall_time_secs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub stream_hash: String,
    pub faa: f64,
    pub forgetting: f64,
    pub per_task_forgetting: Vec<f64>,
    pub detections: Vec<DriftEventRecord>,
    pub ledger: CostLedger,
    /// Run id of the FR run the costs are normalized against.
    pub baseline: Option<String>,
    pub normalized: Option<NormalizedCosts>,
    /// Canonical config text the run was produced from.
    pub config: String,
}

impl RunSummary {
    fn from_output(cfg: &RunConfig, out: &RunOutput) -> Result<Self> {
        let run_id = cfg.run_id();
        let is_fr = cfg.strategy == StrategyKind::FullRelearning;
        Ok(Self {
            run_id: run_id.clone(),
            strategy: cfg.strategy,
            seed: cfg.seed,
            stream_hash: cfg.stream_hash(),
            faa: faa(&out.matrix)?,
            forgetting: forgetting(&out.matrix)?,
            per_task_forgetting: per_task_forgetting(&out.matrix)?,
            detections: out.events.clone(),
            ledger: out.ledger.clone(),
            baseline: is_fr.then_some(run_id),
            normalized: is_fr.then(|| NormalizedCosts::relative(&out.ledger, &out.ledger)),
            config: render_config(cfg),
        })
    }

    /// Normalizes this run's costs against `base`, which must be an FR run.
    pub fn normalize_against(&mut self, base: &RunSummary) -> Result<()> {
        if base.strategy != StrategyKind::FullRelearning {
            return Err(Error::IncompatibleRuns(format!(
                "baseline {} is not a full-relearning run",
                base.run_id
            )));
        }
        if base.stream_hash != self.stream_hash {
            return Err(Error::IncompatibleRuns(format!(
                "{} and {} were run on different streams",
                self.run_id, base.run_id
            )));
        }
        self.baseline = Some(base.run_id.clone());
        self.normalized = Some(NormalizedCosts::relative(&self.ledger, &base.ledger));
        Ok(())
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_summary(dir: &Path, summary: &RunSummary) -> Result<()> {
    write(&dir.join(SUMMARY_FILE), serde_json::to_string_pretty(summary)? + "\n")
}

pub fn run_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join(cfg.run_id())
}

/// Runs one config against an already-built stream and writes its artifacts.
pub fn run_on_stream(cfg: &RunConfig, stream: &TaskStream) -> Result<RunSummary> {
    cfg.validate()?;
    let dir = run_dir(cfg);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let snap_dir = dir.join(SNAPSHOT_DIR);
    if cfg.snapshots {
        fs::create_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
    }
    let out = run_stream_with(stream, cfg.strategy, &cfg.trainer, cfg.seed, |i, state| {
        if cfg.snapshots {
            state
                .buffer
                .write_snapshot(&snap_dir.join(format!("buffer_task_{i}.jsonl")))?;
        }
        Ok(())
    })?;

    write(&dir.join(MATRIX_FILE), out.matrix.to_csv())?;
    let mut events = String::new();
    for e in &out.events {
        events.push_str(&serde_json::to_string(e)?);
        events.push('\n');
    }
    write(&dir.join(EVENTS_FILE), events)?;
    let summary = RunSummary::from_output(cfg, &out)?;
    write_summary(&dir, &summary)?;
    Ok(summary)
}

/// Builds the stream, trains, and writes `accuracy_matrix.csv`,
/// `summary.json`, `events.jsonl` (and per-task buffer snapshots when
/// enabled) under `output_dir/<run-id>/`.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let stream = build_stream(&cfg.stream_config())?;
    run_on_stream(cfg, &stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample standard deviation; zero for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyAggregate {
    pub strategy: StrategyKind,
    pub seeds: Vec<u64>,
    pub faa: MeanStd,
    pub forgetting: MeanStd,
    pub adaptation_labels: f64,
    pub flops: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub stream_hash: String,
    pub runs: Vec<RunSummary>,
    pub strategies: Vec<StrategyAggregate>,
}

fn aggregate(runs: &[RunSummary]) -> Vec<StrategyAggregate> {
    let mut out = Vec::new();
    for s in StrategyKind::ALL {
        let rs: Vec<&RunSummary> = runs.iter().filter(|r| r.strategy == s).collect();
        if rs.is_empty() {
            continue;
        }
        let mean = |f: &dyn Fn(&RunSummary) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64;
        out.push(StrategyAggregate {
            strategy: s,
            seeds: rs.iter().map(|r| r.seed).collect(),
            faa: MeanStd::of(&rs.iter().map(|r| r.faa).collect::<Vec<_>>()),
            forgetting: MeanStd::of(&rs.iter().map(|r| r.forgetting).collect::<Vec<_>>()),
            adaptation_labels: mean(&|r| r.ledger.adaptation_labels as f64),
            flops: mean(&|r| r.ledger.flops as f64),
            wall_time_secs: mean(&|r| r.ledger.wall_time_secs),
        });
    }
    out
}

/// Comparison table with one row per strategy (means over seeds) and each
/// quantity also divided by the FR row. Normalized cells stay empty when no
/// FR run is present or the FR value is zero.
pub fn emit_comparison(runs: &[RunSummary]) -> Result<String> {
    if runs.len() < 2 {
        return Err(Error::IncompatibleRuns(format!(
            "a comparison needs at least two runs, got {}",
            runs.len()
        )));
    }
    if let Some(r) = runs.iter().find(|r| r.stream_hash != runs[0].stream_hash) {
        return Err(Error::IncompatibleRuns(format!(
            "{} uses stream {} but {} uses stream {}",
            r.run_id, r.stream_hash, runs[0].run_id, runs[0].stream_hash
        )));
    }
    let rows = aggregate(runs);
    let fr = rows
        .iter()
        .find(|r| r.strategy == StrategyKind::FullRelearning)
        .cloned();
    let mut csv = String::from(
        "strategy,runs,faa_mean,faa_std,forgetting_mean,forgetting_std,labels,flops,wall_time_secs,\
         faa_norm,forgetting_norm,labels_norm,flops_norm,wall_time_norm\n",
    );
    for r in &rows {
        let norm = |v: f64, base: Option<f64>| match base {
            Some(b) if b != 0.0 => (v / b).to_string(),
            _ => String::new(),
        };
        let b = fr.as_ref();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.strategy,
            r.seeds.len(),
            r.faa.mean,
            r.faa.std,
            r.forgetting.mean,
            r.forgetting.std,
            r.adaptation_labels,
            r.flops,
            r.wall_time_secs,
            norm(r.faa.mean, b.map(|b| b.faa.mean)),
            norm(r.forgetting.mean, b.map(|b| b.forgetting.mean)),
            norm(r.adaptation_labels, b.map(|b| b.adaptation_labels)),
            norm(r.flops, b.map(|b| b.flops)),
            norm(r.wall_time_secs, b.map(|b| b.wall_time_secs)),
        );
    }
    Ok(csv)
}

pub fn sweep_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join(format!("sweep-{}", cfg.stream_hash()))
}

/// Runs every (seed, strategy) pair, normalizes each run's costs against the
/// FR run of the same seed when one is part of the sweep, and writes
/// `comparison.csv` plus `sweep.json` under `output_dir/sweep-<stream-hash>/`.
///
/// Streams are built once per seed; up to `workers` strategies run on it
/// concurrently, each writing only into its own run directory.
pub fn run_sweep(base: &RunConfig, seeds: &[u64], strategies: &[StrategyKind]) -> Result<SweepReport> {
    if seeds.is_empty() || strategies.is_empty() {
        return Err(Error::Config("a sweep needs at least one seed and one strategy".into()));
    }
    base.validate()?;
    let mut runs = Vec::new();
    for &seed in seeds {
        let mut seeded = base.clone();
        seeded.seed = seed;
        let stream = build_stream(&seeded.stream_config())?;
        let configs: Vec<RunConfig> = strategies
            .iter()
            .map(|&s| {
                let mut c = seeded.clone();
                c.strategy = s;
                c
            })
            .collect();
        let results: Vec<Mutex<Option<Result<RunSummary>>>> = configs.iter().map(|_| Mutex::new(None)).collect();
        let next = Mutex::new(0usize);
        std::thread::scope(|scope| {
            for _ in 0..base.workers.min(configs.len()) {
                scope.spawn(|| loop {
                    let k = {
                        let mut n = next.lock().unwrap();
                        let k = *n;
                        *n += 1;
                        k
                    };
                    let Some(c) = configs.get(k) else { break };
                    *results[k].lock().unwrap() = Some(run_on_stream(c, &stream));
                });
            }
        });
        let mut seed_runs = results
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every job ran"))
            .collect::<Result<Vec<_>>>()?;
        if let Some(fr) = seed_runs
            .iter()
            .find(|r| r.strategy == StrategyKind::FullRelearning)
            .cloned()
        {
            for (r, c) in seed_runs.iter_mut().zip(&configs) {
                r.normalize_against(&fr)?;
                write_summary(&run_dir(c), r)?;
            }
        }
        runs.extend(seed_runs);
    }

    let report = SweepReport {
        stream_hash: base.stream_hash(),
        strategies: aggregate(&runs),
        runs,
    };
    let dir = sweep_dir(base);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    if report.runs.len() >= 2 {
        write(&dir.join(COMPARISON_FILE), emit_comparison(&report.runs)?)?;
    }
    write(&dir.join("sweep.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_computation() {
        let m = MeanStd::of(&[0.8, 0.6, 0.7]);
        assert!((m.mean - 0.7).abs() < 1e-15);
        assert!((m.std - 0.1).abs() < 1e-12);
        assert_eq!(MeanStd::of(&[0.5]).std, 0.0);
    }

    #[test]
    fn normalization_of_fr_is_one() {
        let l = CostLedger {
            adaptation_labels: 600,
            samples_processed: 10,
            flops: 2000,
            wall_time_secs: 1.5,
        };
        let n = NormalizedCosts::relative(&l, &l);
        assert_eq!(n.labels, Some(1.0));
        assert_eq!(n.flops, 1.0);
        assert_eq!(n.wall_time, 1.0);
        let zero = CostLedger::default();
        assert_eq!(NormalizedCosts::relative(&zero, &l).labels, Some(0.0));
    }
}
