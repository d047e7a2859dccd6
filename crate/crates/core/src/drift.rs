//! Uncertainty-based drift detection: predictive entropy of the model's
//! softmax, compared between buffer residents and incoming samples of one
//! class with a two-sample Kolmogorov-Smirnov test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::{Matrix, Mlp};
use crate::streams::Sample;

/// Shannon entropy (nats) of `softmax(logits)`.
pub fn predictive_entropy(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
    let log_z = sum.ln();
    let h: f64 = logits
        .iter()
        .map(|z| {
            let log_p = z - max - log_z;
            let p = log_p.exp();
            if p == 0.0 {
                0.0
            } else {
                -p * log_p
            }
        })
        .sum();
    h.max(0.0)
}

/// Entropy of every sample under `model`.
pub fn uncertainties(model: &Mlp, samples: &[Sample]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(512) {
        let x = Matrix::from_rows(model.input_dim(), chunk.iter().map(|s| &s.features[..]))?;
        let logits = model.forward(&x)?;
        out.extend((0..logits.rows()).map(|r| predictive_entropy(logits.row(r))));
    }
    Ok(out)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample KS statistic `sup_u |F_ref(u) - F_test(u)|` over right-continuous
/// ECDFs, computed by a merge walk over both sorted samples.
pub fn ks_statistic(reference: &[f64], test: &[f64]) -> Result<f64> {
    if reference.is_empty() || test.is_empty() {
        return Err(Error::InsufficientData(
            "KS statistic needs two non-empty samples".into(),
        ));
    }
    let a = sorted(reference);
    let b = sorted(test);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let u = a[i].min(b[j]);
        while i < a.len() && a[i] <= u {
            i += 1;
        }
        while j < b.len() && b[j] <= u {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Asymptotic two-sample p-value `Q_KS(lambda)` with the small-sample
/// correction `lambda = (sqrt(n_e) + 0.12 + 0.11 / sqrt(n_e)) * D`.
pub fn ks_p_value(d: f64, n_ref: usize, n_test: usize) -> f64 {
    if d <= 0.0 || n_ref == 0 || n_test == 0 {
        return 1.0;
    }
    let ne = (n_ref * n_test) as f64 / (n_ref + n_test) as f64;
    let root = ne.sqrt();
    let lambda = (root + 0.12 + 0.11 / root) * d;
    let a2 = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = sign * 2.0 * (a2 * kf * kf).exp();
        sum += term;
        if term.abs() < 1e-12 {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
    }
    // Series failed to converge: lambda is tiny and the distributions agree.
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum DecisionRule {
    /// Drift when the KS p-value falls below this level.
    Significance(f64),
    /// Drift when the KS statistic exceeds this threshold.
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub rule: DecisionRule,
    pub min_samples: usize,
    /// Maximum incoming samples drawn per class for one test.
    pub test_samples: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            rule: DecisionRule::Significance(0.05),
            min_samples: 30,
            test_samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftDecision {
    pub class: usize,
    pub ks_statistic: f64,
    pub p_value: f64,
    pub drifted: bool,
    pub n_ref: usize,
    pub n_test: usize,
    pub under_sampled: bool,
}

/// Compares the entropy distribution of `reference` (buffer residents of
/// `class`) against `incoming` samples of the same class. Either side below
/// `min_samples` yields a no-drift decision flagged as under-sampled.
pub fn detect_class_drift(
    model: &Mlp,
    class: usize,
    reference: &[Sample],
    incoming: &[Sample],
    cfg: &DetectorConfig,
) -> Result<DriftDecision> {
    let (n_ref, n_test) = (reference.len(), incoming.len());
    if n_ref < cfg.min_samples.max(1) || n_test < cfg.min_samples.max(1) {
        return Ok(DriftDecision {
            class,
            ks_statistic: 0.0,
            p_value: 1.0,
            drifted: false,
            n_ref,
            n_test,
            under_sampled: true,
        });
    }
    let u_ref = uncertainties(model, reference)?;
    let u_test = uncertainties(model, incoming)?;
    let d = ks_statistic(&u_ref, &u_test)?;
    let p = ks_p_value(d, n_ref, n_test);
    let drifted = match cfg.rule {
        DecisionRule::Significance(alpha) => p < alpha,
        DecisionRule::Threshold(delta) => d > delta,
    };
    Ok(DriftDecision {
        class,
        ks_statistic: d,
        p_value: p,
        drifted,
        n_ref,
        n_test,
        under_sampled: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_have_max_entropy() {
        let h = predictive_entropy(&[0.3; 10]);
        assert!((h - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_have_near_zero_entropy() {
        assert!(predictive_entropy(&[50.0, -50.0]) < 1e-40);
        assert_eq!(predictive_entropy(&[1000.0, -1000.0]), 0.0);
    }

    #[test]
    fn entropy_matches_high_precision_value() {
        // 40-digit evaluation of -sum p ln p for softmax(1, 0, -1).
        let h = predictive_entropy(&[1.0, 0.0, -1.0]);
        assert!((h - 0.832_395_581_839_938_9).abs() < 1e-14, "{h}");
    }

    #[test]
    fn entropy_is_shift_invariant() {
        let base = [0.2, -1.3, 2.2, 0.0];
        let shifted: Vec<f64> = base.iter().map(|v| v + 17.5).collect();
        assert!((predictive_entropy(&base) - predictive_entropy(&shifted)).abs() <= 1e-12);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [0.3, 0.1, 0.2, 0.2];
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[0.1, 0.2, 0.3], &[0.4, 0.5, 0.6]).unwrap(), 1.0);
        assert_eq!(
            ks_statistic(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap(),
            0.25
        );
    }

    #[test]
    fn ks_empty_is_insufficient() {
        assert!(matches!(ks_statistic(&[], &[1.0]), Err(Error::InsufficientData(_))));
        assert!(matches!(ks_statistic(&[1.0], &[]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn p_value_edges() {
        assert_eq!(ks_p_value(0.0, 100, 100), 1.0);
        assert!(ks_p_value(1.0, 100, 100) < 1e-12);
        let p = ks_p_value(0.2, 100, 100);
        assert!((p - 0.031_376_652).abs() < 1e-8, "{p}");
        assert_eq!(ks_p_value(0.001, 10, 10), 1.0);
    }

    #[test]
    fn under_sampled_guard() {
        let model = Mlp::new(&[2, 3], 0).unwrap();
        let reference: Vec<Sample> = (0..40).map(|i| Sample::new(i, vec![0.1, 0.2], 0, 0)).collect();
        let incoming: Vec<Sample> = reference[..5].to_vec();
        let d = detect_class_drift(&model, 0, &reference, &incoming, &DetectorConfig::default()).unwrap();
        assert!(d.under_sampled && !d.drifted);
        assert_eq!((d.n_ref, d.n_test), (40, 5));
    }

    #[test]
    fn identical_sets_are_not_drift() {
        let model = Mlp::new(&[2, 8, 3], 4).unwrap();
        let samples: Vec<Sample> = (0..50)
            .map(|i| Sample::new(i, vec![(i as f64).sin(), (i as f64 * 0.7).cos()], 1, 0))
            .collect();
        let d = detect_class_drift(&model, 1, &samples, &samples.clone(), &DetectorConfig::default()).unwrap();
        assert!(!d.drifted);
        assert_eq!(d.ks_statistic, 0.0);
        assert_eq!(d.p_value, 1.0);
    }

    #[test]
    fn threshold_mode_uses_statistic() {
        let model = Mlp::new(&[1, 3], 2).unwrap();
        let a: Vec<Sample> = (0..40).map(|i| Sample::new(i, vec![i as f64 * 0.01], 0, 0)).collect();
        let b: Vec<Sample> = (0..40)
            .map(|i| Sample::new(i, vec![5.0 + i as f64 * 0.01], 0, 1))
            .collect();
        let cfg = DetectorConfig {
            rule: DecisionRule::Threshold(0.99),
            ..DetectorConfig::default()
        };
        let d = detect_class_drift(&model, 0, &a, &b, &cfg).unwrap();
        assert_eq!(d.drifted, d.ks_statistic > 0.99);
    }
}
