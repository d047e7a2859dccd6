//! Theory diagnostics for one config: reservoir replacement tables, gradient
//! interference of each drifted class against a no-drift control, and the
//! alignment-efficiency sweep over random gradient pairs.

use std::fs;
use std::path::PathBuf;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::error::{Error, Result};
use crate::metrics::{
    alpha_grid, cosine_similarity, eta_align, interference_from_gradients, measure_drift_interference,
    theorem2_replacement_suite, InterferenceReport, ReplacementReport,
};
use crate::nnet::FlatGradient;
use crate::seed::{self, RunSeeds};
use crate::streams::{build_stream, TaskStream};
use crate::trainer::{run_task, TrainState};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const REPLACEMENT_NC: [u64; 3] = [10, 50, 100];
const REPLACEMENT_TRIALS: usize = 50_000;
const RANDOM_PAIRS: usize = 100;
const RANDOM_PAIR_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInterference {
    pub task: usize,
    pub class: usize,
    /// Pre-drift pool against the drifted pool.
    pub drifted: InterferenceReport,
    /// Two disjoint halves of the pre-drift pool.
    pub control: InterferenceReport,
    /// `control.cosine_sim - drifted.cosine_sim`.
    pub similarity_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomPairSummary {
    pub pairs: usize,
    pub min_cosine: f64,
    pub max_cosine: f64,
    pub all_non_decreasing: bool,
    /// Largest `|eta_align(1) - 1|` over all pairs.
    pub max_eta_at_one_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub seed: u64,
    pub replacement: Vec<ReplacementReport>,
    pub interference: Vec<ClassInterference>,
    pub random_pairs: RandomPairSummary,
    pub config: String,
}

/// Interference of every drift event's classes, measured with the model as
/// it stands just before the event's task.
pub fn interference_diagnostics(cfg: &RunConfig, stream: &TaskStream) -> Result<Vec<ClassInterference>> {
    let mut state = TrainState::new(
        stream.dim(),
        stream.num_classes(),
        &cfg.trainer,
        RunSeeds::from_master(cfg.seed),
    )?;
    let mut trained = 0;
    let mut out = Vec::new();
    for event in stream.drift_events() {
        while trained < event.task_index {
            let view = stream.task_view(trained, cfg.strategy)?;
            run_task(&mut state, &view, cfg.strategy, &cfg.trainer)?;
            trained += 1;
        }
        for &class in &event.affected_classes {
            let new_version = stream.version_at(class, event.task_index);
            let old = stream.class_train(class, new_version - 1);
            let new = stream.class_train(class, new_version);
            let drifted = measure_drift_interference(&state.model, old, new)?;
            let (evens, odds): (Vec<_>, Vec<_>) = old.iter().cloned().enumerate().partition(|(i, _)| i % 2 == 0);
            let halves = |v: Vec<(usize, _)>| v.into_iter().map(|(_, s)| s).collect::<Vec<_>>();
            let control = measure_drift_interference(&state.model, &halves(evens), &halves(odds))?;
            let similarity_gap = control.cosine_sim.zip(drifted.cosine_sim).map(|(c, d)| c - d);
            out.push(ClassInterference {
                task: event.task_index,
                class,
                drifted,
                control,
                similarity_gap,
            });
        }
    }
    Ok(out)
}

/// Alpha sweeps over Gaussian random gradient pairs.
pub fn random_pair_diagnostics(pairs: usize, dim: usize, seed: u64) -> Result<RandomPairSummary> {
    let mut rng = seed::rng(seed, "random-pairs", 0);
    let mut draw = || FlatGradient((0..dim).map(|_| StandardNormal.sample(&mut rng)).collect());
    let mut summary = RandomPairSummary {
        pairs,
        min_cosine: f64::INFINITY,
        max_cosine: f64::NEG_INFINITY,
        all_non_decreasing: true,
        max_eta_at_one_error: 0.0,
    };
    for _ in 0..pairs {
        let (a, b) = (draw(), draw());
        let sim = cosine_similarity(&a, &b)?;
        summary.min_cosine = summary.min_cosine.min(sim);
        summary.max_cosine = summary.max_cosine.max(sim);
        let report = interference_from_gradients(&a, &b)?;
        summary.all_non_decreasing &= report.non_decreasing;
        summary.max_eta_at_one_error = summary.max_eta_at_one_error.max((eta_align(&a, &b, 1.0)? - 1.0).abs());
    }
    debug_assert_eq!(alpha_grid().len(), 11);
    Ok(summary)
}

pub fn run_diagnostics(cfg: &RunConfig) -> Result<DiagnosticsReport> {
    cfg.validate()?;
    let stream = build_stream(&cfg.stream_config())?;
    let replacement = REPLACEMENT_NC
        .iter()
        .map(|&n_c| {
            theorem2_replacement_suite(
                cfg.trainer.buffer_capacity,
                stream.num_classes(),
                n_c,
                REPLACEMENT_TRIALS,
                cfg.seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticsReport {
        seed: cfg.seed,
        replacement,
        interference: interference_diagnostics(cfg, &stream)?,
        random_pairs: random_pair_diagnostics(RANDOM_PAIRS, RANDOM_PAIR_DIM, cfg.seed)?,
        config: super::render_config(cfg),
    })
}

/// Runs the diagnostics and writes `diagnostics.json` under
/// `output_dir/diagnose-<config-hash>-s<seed>/`.
pub fn diagnose(cfg: &RunConfig) -> Result<(PathBuf, DiagnosticsReport)> {
    let report = run_diagnostics(cfg)?;
    let dir = cfg
        .output_dir
        .join(format!("diagnose-{}-s{}", cfg.config_hash(), cfg.seed));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join(DIAGNOSTICS_FILE);
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok((path, report))
}
