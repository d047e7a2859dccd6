//! Drift-augmented class-incremental task streams.
//!
//! A stream is a sequence of tasks with pairwise-disjoint new-class sets.
//! Drift events fire at chosen tasks and transform every previously seen
//! class (or a configured subset) into a new permanent version: from that
//! task on, test data for those classes is served at the new version, and the
//! drift task exposes the drifted training data as a labeled recurring pool.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::trainer::StrategyKind;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// One labeled instance. Features are shared so buffer copies are cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Identifier of the underlying base instance; drifted copies keep it.
    pub id: u64,
    pub features: Arc<[f64]>,
    pub label: usize,
    pub drift_version: u32,
}

impl Sample {
    pub fn new(id: u64, features: Vec<f64>, label: usize, drift_version: u32) -> Self {
        Self {
            id,
            features: features.into(),
            label,
            drift_version,
        }
    }
}

// ---------------------------------------------------------------------------
// IDX files

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            offset: offset as u64,
            message: "file truncated inside the header".into(),
        })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::DatasetMissing {
            path: path.to_path_buf(),
        });
    }
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Raw IDX image tensor: `count` images of `rows x cols` unsigned bytes.
#[derive(Debug, Clone)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = read_file(path)?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("bad magic number {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let count = read_u32_be(&bytes, 4, path)? as usize;
    let rows = read_u32_be(&bytes, 8, path)? as usize;
    let cols = read_u32_be(&bytes, 12, path)? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() != need {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 16 + body.len().min(need) as u64,
            message: format!(
                "header declares {count} images of {rows}x{cols} ({need} bytes) but {} bytes follow",
                body.len()
            ),
        });
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body.to_vec(),
    })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_file(path)?;
    let magic = read_u32_be(&bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("bad magic number {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let count = read_u32_be(&bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 8 + body.len().min(count) as u64,
            message: format!("header declares {count} labels but {} bytes follow", body.len()),
        });
    }
    Ok(body.to_vec())
}

/// Loads an images/labels IDX pair into samples with pixels scaled to [0, 1].
/// Sample ids are the record indices within the file.
pub fn load_fashion_mnist(images_path: &Path, labels_path: &Path) -> Result<Vec<Sample>> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.count != labels.len() {
        return Err(Error::Format {
            path: labels_path.to_path_buf(),
            offset: 4,
            message: format!(
                "label count {} does not match image count {} in {}",
                labels.len(),
                images.count,
                images_path.display()
            ),
        });
    }
    let dim = images.rows * images.cols;
    images
        .pixels
        .chunks_exact(dim.max(1))
        .zip(&labels)
        .enumerate()
        .map(|(i, (px, &y))| {
            if y > 9 {
                return Err(Error::Format {
                    path: labels_path.to_path_buf(),
                    offset: 8 + i as u64,
                    message: format!("label {y} outside 0..=9"),
                });
            }
            let features = px.iter().map(|&p| p as f64 / 255.0).collect();
            Ok(Sample::new(i as u64, features, y as usize, 0))
        })
        .collect()
}

/// Standard Fashion-MNIST file names inside a dataset directory.
pub fn fashion_mnist_paths(dir: &Path) -> [(PathBuf, PathBuf); 2] {
    [
        (dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte")),
        (dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte")),
    ]
}

// ---------------------------------------------------------------------------
// Drift transforms

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftTransform {
    Permute,
    GaussianNoise,
    RotatePairs,
}

impl DriftTransform {
    pub fn name(self) -> &'static str {
        match self {
            DriftTransform::Permute => "permute",
            DriftTransform::GaussianNoise => "gaussian_noise",
            DriftTransform::RotatePairs => "rotate_pairs",
        }
    }
}

impl std::str::FromStr for DriftTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "permute" => Ok(DriftTransform::Permute),
            "gaussian_noise" => Ok(DriftTransform::GaussianNoise),
            "rotate_pairs" => Ok(DriftTransform::RotatePairs),
            other => Err(Error::Config(format!(
                "unknown drift transform `{other}` (expected permute, gaussian_noise or rotate_pairs)"
            ))),
        }
    }
}

pub const NOISE_SIGMA: [f64; 5] = [0.05, 0.1, 0.2, 0.4, 0.8];
pub const ROTATION_DEGREES: [f64; 5] = [15.0, 30.0, 45.0, 60.0, 90.0];

fn check_severity(severity: u8) -> Result<()> {
    if !(1..=5).contains(&severity) {
        return Err(Error::Config(format!("severity must be in 1..=5, got {severity}")));
    }
    Ok(())
}

/// The concrete map of one drift event. Every sample of the event goes
/// through the same map; noise is additionally keyed by sample id so a given
/// sample always receives the same perturbation.
#[derive(Debug, Clone)]
pub enum DriftMap {
    /// `out[i] = in[source[i]]`.
    Permute {
        source: Vec<usize>,
    },
    GaussianNoise {
        sigma: f64,
        seed: u64,
    },
    RotatePairs {
        pairs: Vec<(usize, usize)>,
        cos: f64,
        sin: f64,
    },
}

impl DriftMap {
    pub fn new(transform: DriftTransform, severity: u8, seed: u64, dim: usize) -> Result<Self> {
        check_severity(severity)?;
        let mut rng = seed::rng(seed, "drift-map", 0);
        let level = severity as usize - 1;
        Ok(match transform {
            DriftTransform::Permute => {
                let moved = (dim * severity as usize + 2) / 5;
                let mut idx: Vec<usize> = (0..dim).collect();
                idx.shuffle(&mut rng);
                let chosen = &idx[..moved];
                let mut targets = chosen.to_vec();
                targets.shuffle(&mut rng);
                let mut source: Vec<usize> = (0..dim).collect();
                for (&dst, &src) in chosen.iter().zip(&targets) {
                    source[dst] = src;
                }
                DriftMap::Permute { source }
            }
            DriftTransform::GaussianNoise => DriftMap::GaussianNoise {
                sigma: NOISE_SIGMA[level],
                seed,
            },
            DriftTransform::RotatePairs => {
                let mut idx: Vec<usize> = (0..dim).collect();
                idx.shuffle(&mut rng);
                let pairs = idx.chunks_exact(2).map(|p| (p[0], p[1])).collect();
                let angle = ROTATION_DEGREES[level] * PI / 180.0;
                DriftMap::RotatePairs {
                    pairs,
                    cos: angle.cos(),
                    sin: angle.sin(),
                }
            }
        })
    }

    /// Returns the transformed sample with its drift version incremented.
    pub fn apply(&self, sample: &Sample) -> Sample {
        let x = &sample.features;
        let features: Vec<f64> = match self {
            DriftMap::Permute { source } => source.iter().map(|&s| x[s]).collect(),
            DriftMap::GaussianNoise { sigma, seed } => {
                let mut rng = seed::rng(*seed, "noise", sample.id ^ ((sample.drift_version as u64) << 48));
                x.iter()
                    .map(|&v| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        v + sigma * z
                    })
                    .collect()
            }
            DriftMap::RotatePairs { pairs, cos, sin } => {
                let mut out = x.to_vec();
                for &(a, b) in pairs {
                    out[a] = cos * x[a] - sin * x[b];
                    out[b] = sin * x[a] + cos * x[b];
                }
                out
            }
        };
        Sample {
            id: sample.id,
            features: features.into(),
            label: sample.label,
            drift_version: sample.drift_version + 1,
        }
    }
}

/// Applies one drift transform to a single sample.
pub fn apply_drift_transform(sample: &Sample, transform: DriftTransform, severity: u8, seed: u64) -> Result<Sample> {
    Ok(DriftMap::new(transform, severity, seed, sample.features.len())?.apply(sample))
}

// ---------------------------------------------------------------------------
// Stream configuration and construction

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Per-coordinate standard deviation of every class cluster.
    pub sigma: f64,
    /// Class means are drawn uniformly from `[-mean_range, mean_range]^dim`.
    pub mean_range: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dim: 16,
            train_per_class: 500,
            test_per_class: 200,
            sigma: 1.0,
            mean_range: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    FashionMnist { data_dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub dataset: DatasetSpec,
    pub tasks: usize,
    pub classes_per_task: usize,
    pub drift_tasks: Vec<usize>,
    pub transform: DriftTransform,
    pub severity: u8,
    /// Restricts drift to these classes; `None` drifts every seen class.
    pub drift_classes: Option<Vec<usize>>,
    pub max_train_per_class: Option<usize>,
    pub max_test_per_class: Option<usize>,
    pub seed: u64,
}

impl StreamConfig {
    pub fn synthetic(tasks: usize, classes_per_task: usize, seed: u64) -> Self {
        Self {
            dataset: DatasetSpec::Synthetic(SyntheticSpec::default()),
            tasks,
            classes_per_task,
            drift_tasks: Vec::new(),
            transform: DriftTransform::Permute,
            severity: 5,
            drift_classes: None,
            max_train_per_class: None,
            max_test_per_class: None,
            seed,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.tasks * self.classes_per_task
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks < 2 {
            return Err(Error::Config(format!("tasks must be >= 2, got {}", self.tasks)));
        }
        if self.classes_per_task < 1 {
            return Err(Error::Config("classes_per_task must be >= 1".into()));
        }
        check_severity(self.severity)?;
        let mut seen = BTreeSet::new();
        for &t in &self.drift_tasks {
            if t < 1 || t >= self.tasks {
                return Err(Error::Config(format!(
                    "drift task {t} outside 1..{} (drift needs a prior task)",
                    self.tasks
                )));
            }
            if !seen.insert(t) {
                return Err(Error::Config(format!("drift task {t} listed twice")));
            }
        }
        if let Some(classes) = &self.drift_classes {
            if let Some(&c) = classes.iter().find(|&&c| c >= self.num_classes()) {
                return Err(Error::Config(format!(
                    "drift class {c} outside the {}-class label universe",
                    self.num_classes()
                )));
            }
        }
        if matches!(self.max_train_per_class, Some(0)) || matches!(self.max_test_per_class, Some(0)) {
            return Err(Error::Config("per-class sample caps must be >= 1".into()));
        }
        match &self.dataset {
            DatasetSpec::Synthetic(s) => {
                if s.dim == 0 || s.train_per_class == 0 || s.test_per_class == 0 {
                    return Err(Error::Config(
                        "synthetic dim and per-class sample counts must be >= 1".into(),
                    ));
                }
                if !(s.sigma > 0.0 && s.mean_range > 0.0) {
                    return Err(Error::Config("synthetic sigma and mean_range must be positive".into()));
                }
            }
            DatasetSpec::FashionMnist { .. } => {
                if self.num_classes() > 10 {
                    return Err(Error::Config(format!(
                        "Fashion-MNIST has 10 classes but tasks x classes_per_task = {}",
                        self.num_classes()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Scheduled drift of a set of classes at one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEvent {
    pub task_index: usize,
    pub transform: DriftTransform,
    pub severity: u8,
    pub affected_classes: Vec<usize>,
    pub seed: u64,
}

/// Recurring class at a drift task.
#[derive(Debug, Clone)]
pub struct RecurringClass {
    pub class: usize,
    pub drift_version: u32,
    /// Labeled drifted training data; withheld (empty) for Vanilla.
    pub pool: Vec<Sample>,
    /// Test-stream samples of the class at its current version, used for
    /// detection before any training happens.
    pub incoming: Vec<Sample>,
}

/// Everything the learner receives at one task.
#[derive(Debug, Clone)]
pub struct TaskView {
    pub index: usize,
    pub new_classes: Vec<usize>,
    pub train: Vec<Sample>,
    pub recurring: Vec<RecurringClass>,
    /// `test_by_task[j]` is task `j`'s test split as served at this task.
    pub test_by_task: Vec<Vec<Sample>>,
}

impl TaskView {
    pub fn recurring_pool_size(&self) -> usize {
        self.recurring.iter().map(|r| r.pool.len()).sum()
    }

    /// All test samples of the classes seen so far.
    pub fn test_set(&self) -> impl Iterator<Item = &Sample> {
        self.test_by_task.iter().flatten()
    }
}

#[derive(Debug, Clone)]
pub struct TaskStream {
    num_classes: usize,
    dim: usize,
    tasks: Vec<Vec<usize>>,
    events: Vec<DriftEvent>,
    /// `train[class][version]`.
    train: Vec<Vec<Vec<Sample>>>,
    test: Vec<Vec<Vec<Sample>>>,
}

const TEST_ID_BASE: u64 = 1 << 40;

impl TaskStream {
    fn assemble(cfg: &StreamConfig, dim: usize, train: Vec<Vec<Sample>>, test: Vec<Vec<Sample>>) -> Result<Self> {
        let k = cfg.num_classes();
        let tasks: Vec<Vec<usize>> = (0..cfg.tasks)
            .map(|t| (t * cfg.classes_per_task..(t + 1) * cfg.classes_per_task).collect())
            .collect();

        let mut events = Vec::new();
        let mut drift_tasks = cfg.drift_tasks.clone();
        drift_tasks.sort_unstable();
        for (e, &t) in drift_tasks.iter().enumerate() {
            let affected: Vec<usize> = (0..t * cfg.classes_per_task)
                .filter(|c| cfg.drift_classes.as_ref().is_none_or(|s| s.contains(c)))
                .collect();
            events.push(DriftEvent {
                task_index: t,
                transform: cfg.transform,
                severity: cfg.severity,
                affected_classes: affected,
                seed: seed::derive(cfg.seed, "drift-event", e as u64),
            });
        }

        let mut train: Vec<Vec<Vec<Sample>>> = train.into_iter().map(|v| vec![v]).collect();
        let mut test: Vec<Vec<Vec<Sample>>> = test.into_iter().map(|v| vec![v]).collect();
        debug_assert_eq!(train.len(), k);
        for ev in &events {
            let map = DriftMap::new(ev.transform, ev.severity, ev.seed, dim)?;
            for &c in &ev.affected_classes {
                for versions in [&mut train[c], &mut test[c]] {
                    let next = versions.last().unwrap().iter().map(|s| map.apply(s)).collect();
                    versions.push(next);
                }
            }
        }

        Ok(Self {
            num_classes: k,
            dim,
            tasks,
            events,
            train,
            test,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn new_classes(&self, task: usize) -> &[usize] {
        &self.tasks[task]
    }

    pub fn drift_events(&self) -> &[DriftEvent] {
        &self.events
    }

    /// Drift version of `class` as served at `task`.
    pub fn version_at(&self, class: usize, task: usize) -> u32 {
        self.events
            .iter()
            .filter(|e| e.task_index <= task && e.affected_classes.contains(&class))
            .count() as u32
    }

    pub fn class_train(&self, class: usize, version: u32) -> &[Sample] {
        &self.train[class][version as usize]
    }

    pub fn class_test(&self, class: usize, version: u32) -> &[Sample] {
        &self.test[class][version as usize]
    }

    pub fn task_view(&self, i: usize, strategy: StrategyKind) -> Result<TaskView> {
        if i >= self.tasks.len() {
            return Err(Error::TaskIndex {
                index: i,
                len: self.tasks.len(),
            });
        }
        let train = self.tasks[i]
            .iter()
            .flat_map(|&c| self.class_train(c, self.version_at(c, i)).iter().cloned())
            .collect();

        let mut recurring = Vec::new();
        for ev in self.events.iter().filter(|e| e.task_index == i) {
            for &c in &ev.affected_classes {
                let v = self.version_at(c, i);
                let pool = match strategy {
                    StrategyKind::Vanilla => Vec::new(),
                    _ => self.class_train(c, v).to_vec(),
                };
                recurring.push(RecurringClass {
                    class: c,
                    drift_version: v,
                    pool,
                    incoming: self.class_test(c, v).to_vec(),
                });
            }
        }

        let test_by_task = (0..=i)
            .map(|j| {
                self.tasks[j]
                    .iter()
                    .flat_map(|&c| self.class_test(c, self.version_at(c, i)).iter().cloned())
                    .collect()
            })
            .collect();

        Ok(TaskView {
            index: i,
            new_classes: self.tasks[i].clone(),
            train,
            recurring,
            test_by_task,
        })
    }

    /// Canonical little-endian serialization of the whole stream.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut put = |v: u64| out.extend_from_slice(&v.to_le_bytes());
        put(self.num_classes as u64);
        put(self.dim as u64);
        put(self.tasks.len() as u64);
        for t in &self.tasks {
            put(t.len() as u64);
            t.iter().for_each(|&c| put(c as u64));
        }
        put(self.events.len() as u64);
        for e in &self.events {
            put(e.task_index as u64);
            put(e.severity as u64);
            put(e.seed);
            put(e.affected_classes.len() as u64);
            e.affected_classes.iter().for_each(|&c| put(c as u64));
        }
        for split in [&self.train, &self.test] {
            for versions in split {
                put(versions.len() as u64);
                for samples in versions {
                    put(samples.len() as u64);
                    for s in samples {
                        put(s.id);
                        put(s.label as u64);
                        put(s.drift_version as u64);
                        s.features.iter().for_each(|f| put(f.to_bits()));
                    }
                }
            }
        }
        out
    }
}

/// Gaussian class clusters with seeded, well-separated means.
pub fn make_synthetic_stream(cfg: &StreamConfig) -> Result<TaskStream> {
    cfg.validate()?;
    let spec = match &cfg.dataset {
        DatasetSpec::Synthetic(s) => s,
        DatasetSpec::FashionMnist { .. } => {
            return Err(Error::Config("make_synthetic_stream needs a synthetic dataset".into()))
        }
    };
    const MAX_ATTEMPTS: usize = 10_000;
    let k = cfg.num_classes();
    let min_dist = 4.0 * spec.sigma;
    let mut rng = seed::rng(cfg.seed, "synthetic-means", 0);
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    for c in 0..k {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS {
            let m: Vec<f64> = (0..spec.dim)
                .map(|_| rng.gen_range(-spec.mean_range..=spec.mean_range))
                .collect();
            let ok = means
                .iter()
                .all(|o| o.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= min_dist);
            if ok {
                means.push(m);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Config(format!(
                "cannot place {k} class means at pairwise distance >= {min_dist} in {} dimensions \
                 with mean_range {} (failed at class {c})",
                spec.dim, spec.mean_range
            )));
        }
    }

    let n_train = cfg
        .max_train_per_class
        .map_or(spec.train_per_class, |m| m.min(spec.train_per_class));
    let n_test = cfg
        .max_test_per_class
        .map_or(spec.test_per_class, |m| m.min(spec.test_per_class));
    let mut next_id = 0u64;
    let mut draw = |c: usize, n: usize, rng: &mut rand_chacha::ChaCha8Rng, base: u64| -> Vec<Sample> {
        (0..n)
            .map(|_| {
                let f = means[c]
                    .iter()
                    .map(|&mu| {
                        let z: f64 = StandardNormal.sample(rng);
                        mu + spec.sigma * z
                    })
                    .collect();
                let s = Sample::new(base + next_id, f, c, 0);
                next_id += 1;
                s
            })
            .collect()
    };
    let mut train = Vec::with_capacity(k);
    let mut test = Vec::with_capacity(k);
    for c in 0..k {
        let mut r = seed::rng(cfg.seed, "synthetic-class", c as u64);
        train.push(draw(c, n_train, &mut r, 0));
        test.push(draw(c, n_test, &mut r, TEST_ID_BASE));
    }
    TaskStream::assemble(cfg, spec.dim, train, test)
}

/// Builds a stream from pre-loaded image samples (class ids 0..K). Per-class
/// caps keep a seeded random subset.
pub fn make_image_stream(cfg: &StreamConfig, train: Vec<Sample>, test: Vec<Sample>) -> Result<TaskStream> {
    cfg.validate()?;
    let k = cfg.num_classes();
    let dim = train
        .first()
        .map(|s| s.features.len())
        .ok_or(Error::EmptyInput("image training set"))?;
    let split = |samples: Vec<Sample>, cap: Option<usize>, tag: &str, id_base: u64| -> Result<Vec<Vec<Sample>>> {
        let mut per_class: Vec<Vec<Sample>> = vec![Vec::new(); k];
        for mut s in samples {
            if s.features.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    actual: s.features.len(),
                });
            }
            if s.label < k {
                s.id += id_base;
                per_class[s.label].push(s);
            }
        }
        for (c, v) in per_class.iter_mut().enumerate() {
            if v.is_empty() {
                return Err(Error::InsufficientData(format!("class {c} has no {tag} samples")));
            }
            if let Some(cap) = cap {
                if v.len() > cap {
                    v.shuffle(&mut seed::rng(cfg.seed, tag, c as u64));
                    v.truncate(cap);
                    v.sort_by_key(|s| s.id);
                }
            }
        }
        Ok(per_class)
    };
    let train = split(train, cfg.max_train_per_class, "train-subset", 0)?;
    let test = split(test, cfg.max_test_per_class, "test-subset", TEST_ID_BASE)?;
    TaskStream::assemble(cfg, dim, train, test)
}

/// Builds the stream named by the config, loading image data from disk.
pub fn build_stream(cfg: &StreamConfig) -> Result<TaskStream> {
    match &cfg.dataset {
        DatasetSpec::Synthetic(_) => make_synthetic_stream(cfg),
        DatasetSpec::FashionMnist { data_dir } => {
            cfg.validate()?;
            let [(tri, trl), (tei, tel)] = fashion_mnist_paths(data_dir);
            let train = load_fashion_mnist(&tri, &trl)?;
            let test = load_fashion_mnist(&tei, &tel)?;
            make_image_stream(cfg, train, test)
        }
    }
}
