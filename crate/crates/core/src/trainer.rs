//! Task-by-task rehearsal training with test-then-train drift handling.
//!
//! Per task: detect drift on every recurring class with the current model,
//! adapt according to the strategy, train on the task data plus replayed
//! buffer samples, then offer the task's training data to the reservoir.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::drift::{detect_class_drift, DetectorConfig, DriftDecision};
use crate::error::{Error, Result};
use crate::memory::MemoryBuffer;
use crate::metrics::AccuracyMatrix;
use crate::nnet::{Batch, Mlp};
use crate::seed::RunSeeds;
use crate::streams::{Sample, TaskStream, TaskView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Vanilla,
    Amr,
    #[serde(rename = "fr", alias = "full_relearning")]
    FullRelearning,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Vanilla, StrategyKind::Amr, StrategyKind::FullRelearning];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Vanilla => "vanilla",
            StrategyKind::Amr => "amr",
            StrategyKind::FullRelearning => "fr",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(StrategyKind::Vanilla),
            "amr" => Ok(StrategyKind::Amr),
            "fr" | "full_relearning" => Ok(StrategyKind::FullRelearning),
            other => Err(Error::Config(format!(
                "unknown strategy `{other}` (expected vanilla, amr or fr)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub replay_size: usize,
    pub detector: DetectorConfig,
    /// Per-class cap on realigned samples; `None` refills every freed slot.
    pub amr_budget: Option<usize>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            buffer_capacity: 500,
            epochs: 3,
            lr: 0.05,
            batch_size: 32,
            replay_size: 32,
            detector: DetectorConfig::default(),
            amr_budget: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.buffer_capacity == 0 {
            return Err(Error::Config("buffer capacity must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// Labeled-data and compute accounting for one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    /// Labeled drifted samples consumed by adaptation.
    pub adaptation_labels: u64,
    /// Forward+backward sample passes over all epochs, replay included.
    pub samples_processed: u64,
    /// `2 * parameters * samples_processed`.
    pub flops: u64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptAction {
    None,
    Realign,
    Relearn,
}

/// One line of the run's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEventRecord {
    pub task: usize,
    #[serde(flatten)]
    pub decision: DriftDecision,
    pub action: AdaptAction,
    pub labels: u64,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub model: Mlp,
    pub buffer: MemoryBuffer,
    pub seen_classes: BTreeSet<usize>,
    pub ledger: CostLedger,
    data_rng: ChaCha8Rng,
    detect_rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(input_dim: usize, num_classes: usize, cfg: &TrainerConfig, seeds: RunSeeds) -> Result<Self> {
        cfg.validate()?;
        let mut dims = vec![input_dim];
        dims.extend(&cfg.hidden);
        dims.push(num_classes);
        Ok(Self {
            model: Mlp::new(&dims, seeds.init)?,
            buffer: MemoryBuffer::new(cfg.buffer_capacity, seeds.reservoir)?,
            seen_classes: BTreeSet::new(),
            ledger: CostLedger::default(),
            data_rng: ChaCha8Rng::seed_from_u64(seeds.data),
            detect_rng: ChaCha8Rng::seed_from_u64(seeds.detector),
        })
    }
}

#[derive(Debug, Clone)]
pub struct TaskResult {
    pub index: usize,
    pub events: Vec<DriftEventRecord>,
    pub adaptation_labels: u64,
}

/// Current minibatch followed by up to `replay_size` residents drawn
/// uniformly without replacement.
pub fn rehearsal_batch(
    current: &[Sample],
    buffer: &MemoryBuffer,
    replay_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Batch> {
    let dim = current
        .first()
        .map(|s| s.features.len())
        .ok_or(Error::EmptyInput("rehearsal batch without current samples"))?;
    let replay = buffer.sample_replay(replay_size, rng);
    Batch::from_samples(dim, current.iter().chain(&replay))
}

pub fn run_task(
    state: &mut TrainState,
    view: &TaskView,
    strategy: StrategyKind,
    cfg: &TrainerConfig,
) -> Result<TaskResult> {
    let mut events = Vec::new();
    let mut extra: Vec<Sample> = Vec::new();
    let mut labels = 0u64;

    // Test-then-train: every decision uses the model as it stood before this task.
    let snapshot = state.model.clone();
    let mut pending = Vec::new();
    for rc in &view.recurring {
        if !state.seen_classes.contains(&rc.class) {
            continue;
        }
        let reference = state.buffer.class_samples(rc.class);
        let n = cfg.detector.test_samples.min(rc.incoming.len());
        let incoming: Vec<Sample> = sample_indices(&mut state.detect_rng, rc.incoming.len(), n)
            .iter()
            .map(|i| rc.incoming[i].clone())
            .collect();
        let decision = detect_class_drift(&snapshot, rc.class, &reference, &incoming, &cfg.detector)?;
        pending.push((rc, decision));
    }

    for (rc, decision) in pending {
        let (action, used) = match (decision.drifted, strategy) {
            (true, StrategyKind::Amr) => {
                let freed = state.buffer.amr_flush(rc.class);
                let budget = cfg.amr_budget.map_or(freed.len(), |b| b.min(freed.len()));
                let placed = state.buffer.amr_resample(rc.class, &rc.pool, &freed[..budget])?;
                (AdaptAction::Realign, placed as u64)
            }
            (true, StrategyKind::FullRelearning) => {
                extra.extend(rc.pool.iter().cloned());
                (AdaptAction::Relearn, rc.pool.len() as u64)
            }
            _ => (AdaptAction::None, 0),
        };
        labels += used;
        events.push(DriftEventRecord {
            task: view.index,
            decision,
            action,
            labels: used,
        });
    }
    state.ledger.adaptation_labels += labels;

    let train: Vec<&Sample> = view.train.iter().chain(&extra).collect();
    let params = state.model.parameter_count() as u64;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut state.data_rng);
        for chunk in order.chunks(cfg.batch_size) {
            let current: Vec<Sample> = chunk.iter().map(|&i| train[i].clone()).collect();
            let batch = rehearsal_batch(&current, &state.buffer, cfg.replay_size, &mut state.data_rng)?;
            let (_, grad) = state.model.loss_and_grad(&batch)?;
            state.model.sgd_step(&grad, cfg.lr)?;
            state.ledger.samples_processed += batch.len() as u64;
            state.ledger.flops += 2 * params * batch.len() as u64;
        }
    }

    // Relearned pools are part of this task's training data, so they join the
    // reservoir pass like the new classes do.
    for s in train {
        state.buffer.reservoir_update(s.clone());
    }
    state.seen_classes.extend(view.new_classes.iter().copied());

    Ok(TaskResult {
        index: view.index,
        events,
        adaptation_labels: labels,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub matrix: AccuracyMatrix,
    pub ledger: CostLedger,
    pub events: Vec<DriftEventRecord>,
    pub state: TrainState,
}

/// Runs every task in order, filling row `i` of the accuracy matrix after
/// task `i`. `on_task` sees the state after each task (snapshots, logging).
pub fn run_stream_with<F>(
    stream: &TaskStream,
    strategy: StrategyKind,
    cfg: &TrainerConfig,
    seed: u64,
    mut on_task: F,
) -> Result<RunOutput>
where
    F: FnMut(usize, &TrainState) -> Result<()>,
{
    let start = Instant::now();
    let mut state = TrainState::new(stream.dim(), stream.num_classes(), cfg, RunSeeds::from_master(seed))?;
    let mut matrix = AccuracyMatrix::new(stream.len());
    let mut events = Vec::new();
    for i in 0..stream.len() {
        let view = stream.task_view(i, strategy)?;
        let result = run_task(&mut state, &view, strategy, cfg)?;
        events.extend(result.events);
        let row = view
            .test_by_task
            .iter()
            .map(|t| state.model.accuracy(t))
            .collect::<Result<Vec<f64>>>()?;
        matrix.set_row(i, row)?;
        on_task(i, &state)?;
    }
    state.ledger.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(RunOutput {
        matrix,
        ledger: state.ledger.clone(),
        events,
        state,
    })
}

pub fn run_stream(stream: &TaskStream, strategy: StrategyKind, cfg: &TrainerConfig, seed: u64) -> Result<RunOutput> {
    run_stream_with(stream, strategy, cfg, seed, |_, _| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::faa;
    use crate::streams::{make_synthetic_stream, DatasetSpec, StreamConfig};

    fn small_stream(tasks: usize, drift: &[usize]) -> TaskStream {
        let mut cfg = StreamConfig::synthetic(tasks, 2, 5);
        if let DatasetSpec::Synthetic(s) = &mut cfg.dataset {
            s.train_per_class = 60;
            s.test_per_class = 40;
        }
        cfg.drift_tasks = drift.to_vec();
        make_synthetic_stream(&cfg).unwrap()
    }

    fn small_cfg() -> TrainerConfig {
        TrainerConfig {
            hidden: vec![16, 16],
            buffer_capacity: 100,
            epochs: 2,
            detector: DetectorConfig {
                min_samples: 10,
                ..DetectorConfig::default()
            },
            ..TrainerConfig::default()
        }
    }

    #[test]
    fn strategy_names_roundtrip() {
        for s in StrategyKind::ALL {
            assert_eq!(s.name().parse::<StrategyKind>().unwrap(), s);
        }
        assert!("er-ace".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn empty_buffer_gives_current_batch() {
        let buffer = MemoryBuffer::new(10, 0).unwrap();
        let cur: Vec<Sample> = (0..4).map(|i| Sample::new(i, vec![i as f64; 3], 0, 0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = rehearsal_batch(&cur, &buffer, 32, &mut rng).unwrap();
        assert_eq!(b.len(), 4);
    }

    #[test]
    fn replay_adds_requested_samples() {
        let mut buffer = MemoryBuffer::new(500, 0).unwrap();
        for i in 0..600 {
            buffer.reservoir_update(Sample::new(i, vec![0.0; 3], (i % 3) as usize, 0));
        }
        let cur: Vec<Sample> = (0..32).map(|i| Sample::new(i, vec![1.0; 3], 1, 0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(rehearsal_batch(&cur, &buffer, 32, &mut rng).unwrap().len(), 64);
    }

    #[test]
    fn one_task_faa_is_its_accuracy() {
        // Two tasks minimum for a stream; the first row is a one-task run.
        let stream = small_stream(2, &[]);
        let out = run_stream(&stream, StrategyKind::Vanilla, &small_cfg(), 1).unwrap();
        let first = AccuracyMatrix::from_rows(vec![out.matrix.row(0).unwrap().to_vec()]).unwrap();
        assert_eq!(faa(&first).unwrap(), out.matrix.get(0, 0).unwrap());
    }

    #[test]
    fn no_drift_strategies_agree_bitwise() {
        let stream = small_stream(3, &[]);
        let cfg = small_cfg();
        let runs: Vec<_> = StrategyKind::ALL
            .iter()
            .map(|&s| run_stream(&stream, s, &cfg, 9).unwrap())
            .collect();
        for r in &runs[1..] {
            assert_eq!(r.matrix.to_csv(), runs[0].matrix.to_csv());
            assert_eq!(r.ledger.adaptation_labels, 0);
        }
    }

    #[test]
    fn label_budgets_by_strategy() {
        let stream = small_stream(4, &[2]);
        let cfg = small_cfg();
        let pool: u64 = (0..4).map(|c| stream.class_train(c, 1).len() as u64).sum();
        let v = run_stream(&stream, StrategyKind::Vanilla, &cfg, 3).unwrap();
        let a = run_stream(&stream, StrategyKind::Amr, &cfg, 3).unwrap();
        let f = run_stream(&stream, StrategyKind::FullRelearning, &cfg, 3).unwrap();
        assert_eq!(v.ledger.adaptation_labels, 0);
        assert!(a.ledger.adaptation_labels <= cfg.buffer_capacity as u64);
        let fr_detected: u64 = f
            .events
            .iter()
            .filter(|e| e.decision.drifted)
            .map(|e| stream.class_train(e.decision.class, 1).len() as u64)
            .sum();
        assert_eq!(f.ledger.adaptation_labels, fr_detected);
        assert!(f.ledger.adaptation_labels <= pool);
        for e in &a.events {
            if e.decision.drifted {
                assert_eq!(e.action, AdaptAction::Realign);
            }
        }
    }

    #[test]
    fn amr_leaves_no_stale_residents_of_realigned_classes() {
        let stream = small_stream(4, &[2]);
        let cfg = small_cfg();
        let out = run_stream_with(&stream, StrategyKind::Amr, &cfg, 3, |_, st| {
            assert!(st.buffer.index_is_coherent());
            Ok(())
        })
        .unwrap();
        let realigned: Vec<usize> = out
            .events
            .iter()
            .filter(|e| e.action == AdaptAction::Realign)
            .map(|e| e.decision.class)
            .collect();
        assert!(!realigned.is_empty());
        // The post-task reservoir pass only offers new classes under AMR, so
        // realigned classes keep exactly their refreshed residents.
        for c in realigned {
            assert!(out.state.buffer.class_samples(c).iter().all(|s| s.drift_version == 1));
        }
    }
}
