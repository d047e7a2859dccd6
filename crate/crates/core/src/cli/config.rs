//! Flat INI-style run configuration.
//!
//! ```text
//! [stream]
//! dataset = synthetic
//! tasks = 5
//! classes_per_task = 2
//! drift_tasks = 3
//!
//! [train]
//! strategy = amr
//! buffer = 200
//! ```
//!
//! Sections and keys are fixed; anything unknown is rejected with its line
//! number. `render` emits every key explicitly, so `parse(render(c)) == c`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::drift::{DecisionRule, DetectorConfig};
use crate::error::{Error, Result};
use crate::streams::{DatasetSpec, DriftTransform, StreamConfig, SyntheticSpec};
use crate::trainer::{StrategyKind, TrainerConfig};

pub const DATA_DIR_ENV: &str = "DRIFTCL_DATA_DIR";
const DEFAULT_DATA_DIR: &str = "data/fashion_mnist";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Synthetic,
    FashionMnist,
}

impl DatasetKind {
    fn name(self) -> &'static str {
        match self {
            DatasetKind::Synthetic => "synthetic",
            DatasetKind::FashionMnist => "fashion_mnist",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    /// Fashion-MNIST directory; falls back to `$DRIFTCL_DATA_DIR`.
    pub data_dir: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
    pub tasks: usize,
    pub classes_per_task: usize,
    pub drift_tasks: Vec<usize>,
    pub transform: DriftTransform,
    pub severity: u8,
    pub drift_classes: Option<Vec<usize>>,
    pub max_train_per_class: Option<usize>,
    pub max_test_per_class: Option<usize>,
    /// Fixed stream seed; when absent the stream follows the run seed.
    pub stream_seed: Option<u64>,
    pub strategy: StrategyKind,
    pub trainer: TrainerConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub snapshots: bool,
    pub workers: usize,
}

impl RunConfig {
    /// Defaults for everything except the three required stream keys.
    pub fn new(dataset: DatasetKind, tasks: usize, classes_per_task: usize) -> Self {
        Self {
            dataset,
            data_dir: None,
            synthetic: SyntheticSpec::default(),
            tasks,
            classes_per_task,
            drift_tasks: Vec::new(),
            transform: DriftTransform::Permute,
            severity: 5,
            drift_classes: None,
            max_train_per_class: None,
            max_test_per_class: None,
            stream_seed: None,
            strategy: StrategyKind::Amr,
            trainer: TrainerConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("runs"),
            snapshots: false,
            workers: 1,
        }
    }

    pub fn stream_config(&self) -> StreamConfig {
        let dataset = match self.dataset {
            DatasetKind::Synthetic => DatasetSpec::Synthetic(self.synthetic.clone()),
            DatasetKind::FashionMnist => DatasetSpec::FashionMnist {
                data_dir: self.data_dir.clone().unwrap_or_else(|| {
                    std::env::var_os(DATA_DIR_ENV)
                        .map(PathBuf::from)
                        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
                }),
            },
        };
        StreamConfig {
            dataset,
            tasks: self.tasks,
            classes_per_task: self.classes_per_task,
            drift_tasks: self.drift_tasks.clone(),
            transform: self.transform,
            severity: self.severity,
            drift_classes: self.drift_classes.clone(),
            max_train_per_class: self.max_train_per_class,
            max_test_per_class: self.max_test_per_class,
            seed: self.stream_seed.unwrap_or(self.seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stream_config().validate()?;
        self.trainer.validate()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }

    fn hash_text(text: &str) -> String {
        let digest = Sha256::digest(text.as_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Hash of everything that determines a run's results except the seed.
    pub fn config_hash(&self) -> String {
        Self::hash_text(&render_sections(self, &["stream", "model", "train", "detector"]))
    }

    /// Hash of the stream definition alone; runs comparable in one table
    /// share it.
    pub fn stream_hash(&self) -> String {
        Self::hash_text(&render_sections(self, &["stream"]))
    }

    pub fn run_id(&self) -> String {
        format!("{}-{}-s{}", self.strategy, self.config_hash(), self.seed)
    }
}

// ---------------------------------------------------------------------------
// Parsing

struct Entry {
    value: String,
    line: usize,
}

struct Fields<'a> {
    path: &'a str,
    map: BTreeMap<(String, String), Entry>,
}

impl Fields<'_> {
    fn err(&self, line: usize, message: String) -> Error {
        Error::ConfigParse {
            path: self.path.to_string(),
            line,
            message,
        }
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.map.remove(&(section.to_string(), key.to_string()))
    }

    fn parsed<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| self.err(e.line, format!("{section}.{key}: invalid value `{}`: {err}", e.value))),
        }
    }

    fn list(&mut self, section: &str, key: &str) -> Result<Option<Vec<usize>>> {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|err| self.err(e.line, format!("{section}.{key}: invalid list item `{s}`: {err}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn required<T: FromStr>(&mut self, section: &str, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(section, key)?
            .ok_or_else(|| self.err(0, format!("missing required key {section}.{key}")))
    }
}

const KNOWN: &[(&str, &[&str])] = &[
    (
        "stream",
        &[
            "dataset",
            "data_dir",
            "tasks",
            "classes_per_task",
            "drift_tasks",
            "transform",
            "severity",
            "drift_classes",
            "max_train_per_class",
            "max_test_per_class",
            "seed",
            "dim",
            "train_per_class",
            "test_per_class",
            "sigma",
            "mean_range",
        ],
    ),
    ("model", &["hidden"]),
    (
        "train",
        &[
            "strategy",
            "buffer",
            "epochs",
            "lr",
            "batch_size",
            "replay_size",
            "amr_budget",
        ],
    ),
    ("detector", &["mode", "value", "min_samples", "test_samples"]),
    ("run", &["seed", "output_dir", "snapshots", "workers"]),
];

/// Parses config text. `path` only labels error messages.
pub fn parse_config(text: &str, path: &str) -> Result<RunConfig> {
    let mut fields = Fields {
        path,
        map: BTreeMap::new(),
    };
    let mut lines = BTreeMap::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !KNOWN.iter().any(|(s, _)| *s == name) {
                return Err(fields.err(line_no, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| fields.err(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let sec = section
            .clone()
            .ok_or_else(|| fields.err(line_no, format!("key `{key}` appears before any section")))?;
        let allowed = KNOWN.iter().find(|(s, _)| *s == sec).unwrap().1;
        if !allowed.contains(&key) {
            return Err(fields.err(line_no, format!("unknown key `{key}` in [{sec}]")));
        }
        let k = (sec.clone(), key.to_string());
        if fields.map.contains_key(&k) {
            return Err(fields.err(line_no, format!("duplicate key {sec}.{key}")));
        }
        lines.insert(k.clone(), line_no);
        fields.map.insert(
            k,
            Entry {
                value: value.trim().to_string(),
                line: line_no,
            },
        );
    }

    let dataset = match fields.take("stream", "dataset") {
        None => return Err(fields.err(0, "missing required key stream.dataset".into())),
        Some(e) => match e.value.as_str() {
            "synthetic" => DatasetKind::Synthetic,
            "fashion_mnist" => DatasetKind::FashionMnist,
            other => {
                return Err(fields.err(
                    e.line,
                    format!("stream.dataset: unknown dataset `{other}` (expected synthetic or fashion_mnist)"),
                ))
            }
        },
    };
    let tasks = fields.required("stream", "tasks")?;
    let classes_per_task = fields.required("stream", "classes_per_task")?;
    let mut c = RunConfig::new(dataset, tasks, classes_per_task);

    c.data_dir = fields.parsed::<PathBuf>("stream", "data_dir")?;
    c.drift_tasks = fields.list("stream", "drift_tasks")?.unwrap_or_default();
    if let Some(t) = fields.parsed("stream", "transform")? {
        c.transform = t;
    }
    if let Some(s) = fields.parsed("stream", "severity")? {
        c.severity = s;
    }
    c.drift_classes = fields.list("stream", "drift_classes")?;
    c.max_train_per_class = fields.parsed("stream", "max_train_per_class")?;
    c.max_test_per_class = fields.parsed("stream", "max_test_per_class")?;
    c.stream_seed = fields.parsed("stream", "seed")?;
    let syn = &mut c.synthetic;
    if let Some(v) = fields.parsed("stream", "dim")? {
        syn.dim = v;
    }
    if let Some(v) = fields.parsed("stream", "train_per_class")? {
        syn.train_per_class = v;
    }
    if let Some(v) = fields.parsed("stream", "test_per_class")? {
        syn.test_per_class = v;
    }
    if let Some(v) = fields.parsed("stream", "sigma")? {
        syn.sigma = v;
    }
    if let Some(v) = fields.parsed("stream", "mean_range")? {
        syn.mean_range = v;
    }

    if let Some(h) = fields.list("model", "hidden")? {
        c.trainer.hidden = h;
    }

    if let Some(s) = fields.parsed("train", "strategy")? {
        c.strategy = s;
    }
    let t = &mut c.trainer;
    if let Some(v) = fields.parsed("train", "buffer")? {
        t.buffer_capacity = v;
    }
    if let Some(v) = fields.parsed("train", "epochs")? {
        t.epochs = v;
    }
    if let Some(v) = fields.parsed("train", "lr")? {
        t.lr = v;
    }
    if let Some(v) = fields.parsed("train", "batch_size")? {
        t.batch_size = v;
    }
    t.replay_size = fields.parsed("train", "replay_size")?.unwrap_or(t.batch_size);
    t.amr_budget = fields.parsed("train", "amr_budget")?;

    let mode = fields.take("detector", "mode");
    let value: Option<f64> = fields.parsed("detector", "value")?;
    t.detector.rule = match &mode {
        None => DecisionRule::Significance(value.unwrap_or(0.05)),
        Some(e) if e.value == "significance" => DecisionRule::Significance(value.unwrap_or(0.05)),
        Some(e) if e.value == "threshold" => DecisionRule::Threshold(value.unwrap_or(0.2)),
        Some(e) => {
            return Err(fields.err(
                e.line,
                format!(
                    "detector.mode: unknown mode `{}` (expected significance or threshold)",
                    e.value
                ),
            ))
        }
    };
    if let Some(v) = fields.parsed("detector", "min_samples")? {
        t.detector.min_samples = v;
    }
    if let Some(v) = fields.parsed("detector", "test_samples")? {
        t.detector.test_samples = v;
    }

    if let Some(v) = fields.parsed("run", "seed")? {
        c.seed = v;
    }
    if let Some(v) = fields.parsed("run", "output_dir")? {
        c.output_dir = v;
    }
    if let Some(v) = fields.parsed("run", "snapshots")? {
        c.snapshots = v;
    }
    if let Some(v) = fields.parsed("run", "workers")? {
        c.workers = v;
    }

    check_ranges(&c, &fields, &lines)?;
    Ok(c)
}

/// Range checks reported against the offending key's line.
fn check_ranges(c: &RunConfig, f: &Fields, lines: &BTreeMap<(String, String), usize>) -> Result<()> {
    let fail = |sec: &str, key: &str, msg: String| {
        let line = lines.get(&(sec.to_string(), key.to_string())).copied().unwrap_or(0);
        f.err(line, format!("{sec}.{key}: {msg}"))
    };
    if !(1..=5).contains(&c.severity) {
        return Err(fail(
            "stream",
            "severity",
            format!("must be in 1..=5, got {}", c.severity),
        ));
    }
    if c.tasks < 2 {
        return Err(fail("stream", "tasks", format!("must be >= 2, got {}", c.tasks)));
    }
    if c.classes_per_task < 1 {
        return Err(fail("stream", "classes_per_task", "must be >= 1".into()));
    }
    if let Some(&t) = c.drift_tasks.iter().find(|&&t| t < 1 || t >= c.tasks) {
        return Err(fail(
            "stream",
            "drift_tasks",
            format!("task {t} outside 1..{}", c.tasks),
        ));
    }
    if c.trainer.buffer_capacity == 0 {
        return Err(fail("train", "buffer", "must be > 0".into()));
    }
    if !(c.trainer.lr > 0.0 && c.trainer.lr.is_finite()) {
        return Err(fail("train", "lr", format!("must be positive, got {}", c.trainer.lr)));
    }
    if c.trainer.epochs == 0 {
        return Err(fail("train", "epochs", "must be > 0".into()));
    }
    if c.trainer.batch_size == 0 {
        return Err(fail("train", "batch_size", "must be > 0".into()));
    }
    match c.trainer.detector.rule {
        DecisionRule::Significance(a) if !(a > 0.0 && a < 1.0) => {
            return Err(fail(
                "detector",
                "value",
                format!("significance must be in (0, 1), got {a}"),
            ))
        }
        DecisionRule::Threshold(d) if !(0.0..1.0).contains(&d) => {
            return Err(fail(
                "detector",
                "value",
                format!("threshold must be in [0, 1), got {d}"),
            ))
        }
        _ => {}
    }
    if c.workers == 0 {
        return Err(fail("run", "workers", "must be >= 1".into()));
    }
    c.validate().map_err(|e| f.err(0, e.to_string()))
}

// ---------------------------------------------------------------------------
// Rendering

fn join(v: &[usize]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn render_sections(c: &RunConfig, sections: &[&str]) -> String {
    let mut out = String::new();
    for &sec in sections {
        let _ = writeln!(out, "[{sec}]");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match sec {
            "stream" => {
                kv("dataset", c.dataset.name().into());
                if let Some(d) = &c.data_dir {
                    kv("data_dir", d.display().to_string());
                }
                kv("tasks", c.tasks.to_string());
                kv("classes_per_task", c.classes_per_task.to_string());
                kv("drift_tasks", join(&c.drift_tasks));
                kv("transform", c.transform.name().into());
                kv("severity", c.severity.to_string());
                if let Some(d) = &c.drift_classes {
                    kv("drift_classes", join(d));
                }
                if let Some(m) = c.max_train_per_class {
                    kv("max_train_per_class", m.to_string());
                }
                if let Some(m) = c.max_test_per_class {
                    kv("max_test_per_class", m.to_string());
                }
                if let Some(s) = c.stream_seed {
                    kv("seed", s.to_string());
                }
                if c.dataset == DatasetKind::Synthetic {
                    kv("dim", c.synthetic.dim.to_string());
                    kv("train_per_class", c.synthetic.train_per_class.to_string());
                    kv("test_per_class", c.synthetic.test_per_class.to_string());
                    kv("sigma", c.synthetic.sigma.to_string());
                    kv("mean_range", c.synthetic.mean_range.to_string());
                }
            }
            "model" => kv("hidden", join(&c.trainer.hidden)),
            "train" => {
                let t = &c.trainer;
                kv("strategy", c.strategy.name().into());
                kv("buffer", t.buffer_capacity.to_string());
                kv("epochs", t.epochs.to_string());
                kv("lr", t.lr.to_string());
                kv("batch_size", t.batch_size.to_string());
                kv("replay_size", t.replay_size.to_string());
                if let Some(b) = t.amr_budget {
                    kv("amr_budget", b.to_string());
                }
            }
            "detector" => {
                let d: &DetectorConfig = &c.trainer.detector;
                let (mode, value) = match d.rule {
                    DecisionRule::Significance(a) => ("significance", a),
                    DecisionRule::Threshold(t) => ("threshold", t),
                };
                kv("mode", mode.into());
                kv("value", value.to_string());
                kv("min_samples", d.min_samples.to_string());
                kv("test_samples", d.test_samples.to_string());
            }
            "run" => {
                kv("seed", c.seed.to_string());
                kv("output_dir", c.output_dir.display().to_string());
                kv("snapshots", c.snapshots.to_string());
                kv("workers", c.workers.to_string());
            }
            _ => unreachable!("unknown section {sec}"),
        }
        out.push('\n');
    }
    out
}

/// Canonical text form with every key spelled out.
pub fn render_config(c: &RunConfig) -> String {
    render_sections(c, &["stream", "model", "train", "detector", "run"])
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[stream]\ndataset = synthetic\ntasks = 5\nclasses_per_task = 2\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL, "min.ini").unwrap();
        assert_eq!(c.trainer.epochs, 3);
        assert_eq!(c.trainer.lr, 0.05);
        assert_eq!(c.trainer.batch_size, 32);
        assert_eq!(c.trainer.replay_size, 32);
        assert_eq!(c.trainer.detector.rule, DecisionRule::Significance(0.05));
        assert_eq!(c.trainer.detector.min_samples, 30);
        assert_eq!(c.strategy, StrategyKind::Amr);
        assert!(c.drift_tasks.is_empty());
    }

    #[test]
    fn severity_out_of_range_names_key_and_line() {
        let text = format!("{MINIMAL}severity = 6\n");
        match parse_config(&text, "bad.ini") {
            Err(Error::ConfigParse { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("stream.severity"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_missing_keys() {
        let text = format!("{MINIMAL}colour = blue\n");
        assert!(matches!(
            parse_config(&text, "x"),
            Err(Error::ConfigParse { line: 5, .. })
        ));
        let missing = "[stream]\ndataset = synthetic\ntasks = 5\n";
        match parse_config(missing, "x") {
            Err(Error::ConfigParse { message, .. }) => assert!(message.contains("classes_per_task")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_config("[bogus]\n", "x").is_err());
        assert!(parse_config("tasks = 5\n", "x").is_err());
        let dup = format!("{MINIMAL}tasks = 4\n");
        assert!(parse_config(&dup, "x").is_err());
    }

    #[test]
    fn reordered_keys_share_run_id() {
        let a = parse_config(
            "[train]\nbuffer = 200\nstrategy = fr\n[stream]\ndataset = synthetic\ntasks = 5\nclasses_per_task = 2\ndrift_tasks = 3\n",
            "a",
        )
        .unwrap();
        let b = parse_config(
            "[stream]\ndrift_tasks = 3\nclasses_per_task = 2\ntasks = 5\ndataset = synthetic\n# comment\n[train]\nstrategy = fr\nbuffer = 200\n",
            "b",
        )
        .unwrap();
        assert_eq!(a.run_id(), b.run_id());
        let mut c = a.clone();
        c.trainer.buffer_capacity = 201;
        assert_ne!(a.run_id(), c.run_id());
        assert_eq!(a.stream_hash(), c.stream_hash());
    }

    #[test]
    fn threshold_mode_parses() {
        let text = format!("{MINIMAL}[detector]\nmode = threshold\nvalue = 0.3\n");
        let c = parse_config(&text, "x").unwrap();
        assert_eq!(c.trainer.detector.rule, DecisionRule::Threshold(0.3));
        let bad = format!("{MINIMAL}[detector]\nmode = vibes\n");
        assert!(parse_config(&bad, "x").is_err());
    }

    #[test]
    fn render_then_parse_is_identity() {
        let mut c = parse_config(MINIMAL, "x").unwrap();
        c.drift_tasks = vec![2, 4];
        c.drift_classes = Some(vec![0, 3]);
        c.trainer.lr = 0.012_345_678_9;
        c.stream_seed = Some(17);
        c.data_dir = Some("/tmp/fm".into());
        let text = render_config(&c);
        assert_eq!(parse_config(&text, "x").unwrap(), c);
    }
}
