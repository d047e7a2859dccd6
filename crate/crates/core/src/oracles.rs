//! Slow, obviously-correct reference implementations. The `verify` command
//! and the test suites check the production code against these.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::memory::MemoryBuffer;
use crate::nnet::{Batch, Mlp};
use crate::seed;
use crate::streams::Sample;

/// KS statistic by evaluating both ECDFs at every pooled point, O((n+m)^2).
pub fn ks_brute_force(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |xs: &[f64], u: f64| xs.iter().filter(|&&x| x <= u).count() as f64 / xs.len() as f64;
    a.iter()
        .chain(b)
        .map(|&u| (ecdf(a, u) - ecdf(b, u)).abs())
        .fold(0.0, f64::max)
}

/// Permutation estimate of `P(D >= d)` for continuous data with sample sizes
/// `n1` and `n2`. Under the null hypothesis the statistic depends only on
/// ranks, so distinct integers stand in for the pooled sample.
pub fn ks_permutation_p_value(d: f64, n1: usize, n2: usize, permutations: usize, seed: u64) -> f64 {
    let mut rng = seed::rng(seed, "ks-permutation", 0);
    let mut pooled: Vec<f64> = (0..n1 + n2).map(|i| i as f64).collect();
    let mut hits = 0usize;
    for _ in 0..permutations {
        pooled.shuffle(&mut rng);
        let (x, y) = pooled.split_at(n1);
        // Tolerance keeps exact lattice values of D on the inclusive side.
        if ks_brute_force(x, y) >= d - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / permutations as f64
}

pub fn faa_naive(rows: &[Vec<f64>]) -> f64 {
    let last = &rows[rows.len() - 1];
    let mut sum = 0.0;
    for v in last {
        sum += v;
    }
    sum / last.len() as f64
}

pub fn forgetting_naive(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let mut total = 0.0;
    for j in 0..n - 1 {
        let mut best = f64::NEG_INFINITY;
        for row in rows.iter().skip(j) {
            if row[j] > best {
                best = row[j];
            }
        }
        total += best - rows[n - 1][j];
    }
    total / (n - 1) as f64
}

/// Largest relative error between the analytic gradient and central finite
/// differences over every parameter. Gradients smaller than `floor` are
/// compared on the `floor` scale instead of their own.
pub fn max_gradient_error(model: &Mlp, batch: &Batch, h: f64, floor: f64) -> Result<f64> {
    let (_, grad) = model.loss_and_grad(batch)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for k in 0..model.parameter_count() {
        let base = probe.parameters()[k];
        probe.parameters_mut()[k] = base + h;
        let (up, _) = probe.loss_and_grad(batch)?;
        probe.parameters_mut()[k] = base - h;
        let (down, _) = probe.loss_and_grad(batch)?;
        probe.parameters_mut()[k] = base;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grad.0[k];
        let scale = numeric.abs().max(analytic.abs()).max(floor);
        worst = worst.max((numeric - analytic).abs() / scale);
    }
    Ok(worst)
}

/// Random model and batch for gradient checks: 1 or 2 hidden layers, small
/// widths, dense uniform inputs.
pub fn random_gradient_case(case: u64) -> Result<(Mlp, Batch)> {
    let mut rng = seed::rng(case, "gradient-case", 0);
    let input = rng.gen_range(2..8);
    let classes = rng.gen_range(2..6);
    let mut dims = vec![input];
    for _ in 0..rng.gen_range(1..=2) {
        dims.push(rng.gen_range(3..10));
    }
    dims.push(classes);
    // Random biases too: with zero biases a sample that silences a whole
    // layer puts the next layer's pre-activations exactly on the rectifier
    // kink, where central differences see half the one-sided slope.
    let mut model = Mlp::new(&dims, case)?;
    for p in model.parameters_mut() {
        if *p == 0.0 {
            *p = rng.gen_range(-0.5..0.5);
        }
    }
    let n = rng.gen_range(1..12);
    let samples: Vec<Sample> = (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-2.0..2.0)).collect();
            Sample::new(i as u64, x, rng.gen_range(0..classes), 0)
        })
        .collect();
    let batch = Batch::from_samples(input, samples.iter())?;
    Ok((model, batch))
}

/// Fraction of trials in which each of `offers` items is resident after
/// streaming them all through a fresh reservoir of `capacity` slots.
pub fn reservoir_residency(capacity: usize, offers: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let mut counts = vec![0u64; offers];
    let proto: Vec<Sample> = (0..offers).map(|i| Sample::new(i as u64, vec![], 0, 0)).collect();
    for t in 0..trials {
        let mut buf = MemoryBuffer::new(capacity, seed::derive(seed, "residency", t as u64))?;
        for s in &proto {
            buf.reservoir_update(s.clone());
        }
        for s in buf.occupied() {
            counts[s.id as usize] += 1;
        }
    }
    Ok(counts.into_iter().map(|c| c as f64 / trials as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_ks_known_value() {
        assert_eq!(ks_brute_force(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]), 0.25);
    }
}
