//! Accuracy-matrix bookkeeping (final average accuracy, forgetting) and the
//! theory diagnostics: gradient interference between old and new class
//! distributions, alignment efficiency under partial buffer realignment, and
//! reservoir replacement statistics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{expected_replaced, replace_all_probability, replacement_probability};
use crate::nnet::{FlatGradient, Mlp};
use crate::seed;
use crate::streams::Sample;

/// Lower-triangular `A[i][j]`: accuracy on task `j` after training task `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    n: usize,
    rows: Vec<Option<Vec<f64>>>,
}

impl AccuracyMatrix {
    pub fn new(n: usize) -> Self {
        Self { n, rows: vec![None; n] }
    }

    /// Builds a complete matrix from its lower-triangular rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::new(rows.len());
        for (i, r) in rows.into_iter().enumerate() {
            m.set_row(i, r)?;
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn set_row(&mut self, i: usize, values: Vec<f64>) -> Result<()> {
        if i >= self.n {
            return Err(Error::TaskIndex { index: i, len: self.n });
        }
        if values.len() != i + 1 {
            return Err(Error::Shape {
                expected: i + 1,
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Config(format!("accuracy {v} outside [0, 1]")));
        }
        self.rows[i] = Some(values);
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rows.get(i)?.as_ref()?.get(j).copied()
    }

    pub fn row(&self, i: usize) -> Option<&[f64]> {
        self.rows.get(i)?.as_deref()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(Option::is_some)
    }

    /// CSV with header `task_0..task_{N-1}`; cells above the diagonal are empty.
    pub fn to_csv(&self) -> String {
        let mut out = (0..self.n).map(|j| format!("task_{j}")).collect::<Vec<_>>().join(",");
        out.push('\n');
        for i in 0..self.n {
            let cells: Vec<String> = (0..self.n)
                .map(|j| self.get(i, j).map(|v| v.to_string()).unwrap_or_default())
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Config("empty accuracy CSV".into()))?;
        let n = header.split(',').count();
        let mut m = Self::new(n);
        for (i, line) in lines.enumerate() {
            let values = line
                .split(',')
                .take_while(|c| !c.is_empty())
                .map(|c| {
                    c.parse::<f64>()
                        .map_err(|e| Error::Config(format!("row {i}: bad cell `{c}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            m.set_row(i, values)?;
        }
        Ok(m)
    }
}

/// Mean of the final row.
pub fn faa(m: &AccuracyMatrix) -> Result<f64> {
    let last =
        m.n.checked_sub(1)
            .and_then(|i| m.row(i))
            .ok_or_else(|| Error::IncompleteRun("final accuracy row missing".into()))?;
    Ok(last.iter().sum::<f64>() / last.len() as f64)
}

/// Per-task forgetting `max_{j <= k <= N} A[k][j] - A[N][j]` for the first
/// `N - 1` tasks.
pub fn per_task_forgetting(m: &AccuracyMatrix) -> Result<Vec<f64>> {
    if m.n < 2 {
        return Err(Error::UndefinedMetric("forgetting needs at least two tasks"));
    }
    if !m.is_complete() {
        return Err(Error::IncompleteRun("accuracy matrix has missing rows".into()));
    }
    let last = m.n - 1;
    Ok((0..last)
        .map(|j| {
            let peak = (j..=last)
                .map(|k| m.get(k, j).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            peak - m.get(last, j).unwrap()
        })
        .collect())
}

pub fn forgetting(m: &AccuracyMatrix) -> Result<f64> {
    let f = per_task_forgetting(m)?;
    Ok(f.iter().sum::<f64>() / f.len() as f64)
}

// ---------------------------------------------------------------------------
// Gradient alignment

fn check_pair(a: &FlatGradient, b: &FlatGradient) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

pub fn cosine_similarity(a: &FlatGradient, b: &FlatGradient) -> Result<f64> {
    check_pair(a, b)?;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateGradient("cosine similarity of a zero vector"));
    }
    Ok((a.dot(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `(1 + alpha) * G_new + (1 - alpha) * G_old`.
pub fn effective_gradient(old: &FlatGradient, new: &FlatGradient, alpha: f64) -> Result<FlatGradient> {
    check_pair(old, new)?;
    Ok(FlatGradient(
        new.0
            .iter()
            .zip(&old.0)
            .map(|(n, o)| (1.0 + alpha) * n + (1.0 - alpha) * o)
            .collect(),
    ))
}

/// Cosine between the effective gradient and `G_new`.
pub fn eta_align(old: &FlatGradient, new: &FlatGradient, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must be in [0, 1], got {alpha}")));
    }
    let eff = effective_gradient(old, new, alpha)?;
    if new.norm() == 0.0 {
        return Err(Error::DegenerateGradient("G_new is zero"));
    }
    if eff.norm() == 0.0 {
        return Err(Error::DegenerateGradient("effective gradient is zero"));
    }
    cosine_similarity(&eff, new)
}

pub fn alpha_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientDiag {
    pub g_old: FlatGradientSummary,
    pub g_new: FlatGradientSummary,
    pub alpha: f64,
    pub cosine_sim: Option<f64>,
    /// `None` marks a degenerate (zero-norm) configuration.
    pub eta_align: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatGradientSummary {
    pub len: usize,
    pub norm: f64,
}

impl From<&FlatGradient> for FlatGradientSummary {
    fn from(g: &FlatGradient) -> Self {
        Self {
            len: g.len(),
            norm: g.norm(),
        }
    }
}

fn degenerate_as_none(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::DegenerateGradient(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

impl GradientDiag {
    pub fn new(old: &FlatGradient, new: &FlatGradient, alpha: f64) -> Result<Self> {
        Ok(Self {
            g_old: old.into(),
            g_new: new.into(),
            alpha,
            cosine_sim: degenerate_as_none(cosine_similarity(old, new))?,
            eta_align: degenerate_as_none(eta_align(old, new, alpha))?,
        })
    }
}

/// Alignment sweep for one drifted class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceReport {
    pub cosine_sim: Option<f64>,
    pub sweep: Vec<GradientDiag>,
    pub non_decreasing: bool,
}

/// `G_old`, `G_new` as dataset-mean gradients of the two pools, then the full
/// alpha sweep of the alignment efficiency.
pub fn measure_drift_interference(model: &Mlp, old_pool: &[Sample], new_pool: &[Sample]) -> Result<InterferenceReport> {
    let g_old = model.gradient_of_dataset(old_pool)?;
    let g_new = model.gradient_of_dataset(new_pool)?;
    interference_from_gradients(&g_old, &g_new)
}

/// Rounding slack for the monotonicity flag of an alpha sweep.
pub const MONOTONE_SLACK: f64 = 1e-12;

pub fn interference_from_gradients(g_old: &FlatGradient, g_new: &FlatGradient) -> Result<InterferenceReport> {
    let sweep = alpha_grid()
        .into_iter()
        .map(|a| GradientDiag::new(g_old, g_new, a))
        .collect::<Result<Vec<_>>>()?;
    let etas: Vec<f64> = sweep.iter().filter_map(|d| d.eta_align).collect();
    // When |G_old| << |G_new| every eta sits at 1 to within rounding, so
    // allow steps of a few ulps downward.
    let non_decreasing = etas.windows(2).all(|w| w[1] >= w[0] - MONOTONE_SLACK);
    Ok(InterferenceReport {
        cosine_sim: degenerate_as_none(cosine_similarity(g_old, g_new))?,
        sweep,
        non_decreasing,
    })
}

// ---------------------------------------------------------------------------
// Reservoir replacement

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplacementStats {
    /// Probability that a given resident of the class is overwritten.
    pub p_replaced: f64,
    pub expected_replaced: f64,
    pub p_replace_all: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementReport {
    pub capacity: usize,
    pub num_classes: usize,
    pub n_c: u64,
    /// `|M_c| = round(|M| / K)` slots held by the drifted class.
    pub class_slots: usize,
    pub trials: usize,
    pub closed_form: ReplacementStats,
    pub monte_carlo: ReplacementStats,
}

/// Closed-form replacement statistics next to a Monte Carlo estimate. Each
/// simulated trial starts from a buffer whose first `|M_c|` slots hold the
/// drifted class and lets `n_c` new samples each overwrite a uniformly random
/// slot, which is the insertion model behind `P(replaced)` and the expected
/// count. The closed `P(replace all)` counts distinct hits instead, so the two
/// estimates agree only on where it is zero.
pub fn theorem2_replacement_suite(
    capacity: usize,
    num_classes: usize,
    n_c: u64,
    trials: usize,
    seed: u64,
) -> Result<ReplacementReport> {
    if capacity == 0 || num_classes == 0 || trials == 0 {
        return Err(Error::Config(
            "capacity, class count and trial count must be positive".into(),
        ));
    }
    let class_slots = ((capacity as f64 / num_classes as f64).round() as usize).clamp(1, capacity);
    let closed_form = ReplacementStats {
        p_replaced: replacement_probability(capacity, n_c),
        expected_replaced: expected_replaced(capacity, num_classes, n_c),
        p_replace_all: if n_c == 0 {
            0.0
        } else {
            replace_all_probability(capacity, class_slots, n_c)
        },
    };

    let mut rng = seed::rng(seed, "replacement-suite", n_c);
    let mut hit = vec![false; class_slots];
    let mut total_replaced = 0u64;
    let mut all_replaced = 0u64;
    for _ in 0..trials {
        hit.iter_mut().for_each(|h| *h = false);
        let mut replaced = 0usize;
        for _ in 0..n_c {
            let j = rng.gen_range(0..capacity);
            if j < class_slots && !hit[j] {
                hit[j] = true;
                replaced += 1;
            }
        }
        total_replaced += replaced as u64;
        if n_c > 0 && replaced == class_slots {
            all_replaced += 1;
        }
    }
    let mean_replaced = total_replaced as f64 / trials as f64;
    let monte_carlo = ReplacementStats {
        p_replaced: mean_replaced / class_slots as f64,
        expected_replaced: mean_replaced * (capacity as f64 / num_classes as f64) / class_slots as f64,
        p_replace_all: all_replaced as f64 / trials as f64,
    };
    Ok(ReplacementReport {
        capacity,
        num_classes,
        n_c,
        class_slots,
        trials,
        closed_form,
        monte_carlo,
    })
}
