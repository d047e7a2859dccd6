//! Oracle self-tests runnable from the command line. Each check compares a
//! production routine against an independent reference on seeded inputs.

use rand::Rng;
use serde::Serialize;

use crate::drift::{ks_p_value, ks_statistic};
use crate::error::Result;
use crate::metrics::{faa, forgetting, theorem2_replacement_suite, AccuracyMatrix};
use crate::oracles;
use crate::seed;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn ks_against_brute_force(seed: u64) -> Result<Check> {
    let mut rng = seed::rng(seed, "verify-ks", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(5..=200);
        let m = rng.gen_range(5..=200);
        // Coarse grid values force plenty of ties.
        let a: Vec<f64> = (0..n)
            .map(|_| (rng.gen_range(0.0..4.0f64) * 8.0).round() / 8.0)
            .collect();
        let b: Vec<f64> = (0..m)
            .map(|_| (rng.gen_range(0.5..4.5f64) * 8.0).round() / 8.0)
            .collect();
        worst = worst.max((ks_statistic(&a, &b)? - oracles::ks_brute_force(&a, &b)).abs());
    }
    Ok(check(
        "ks-statistic",
        worst <= 1e-12,
        format!("200 pairs, max |fast - brute| = {worst:e}"),
    ))
}

fn p_value_against_permutations(seed: u64) -> Check {
    let asymptotic = ks_p_value(0.2, 100, 100);
    let perm = oracles::ks_permutation_p_value(0.2, 100, 100, 2_000, seed);
    check(
        "ks-p-value",
        (asymptotic - perm).abs() <= 0.02,
        format!("asymptotic {asymptotic:.4} vs permutation {perm:.4}"),
    )
}

fn gradients_against_finite_differences() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let (model, batch) = oracles::random_gradient_case(case)?;
        worst = worst.max(oracles::max_gradient_error(&model, &batch, 1e-5, 1e-6)?);
    }
    Ok(check(
        "gradient",
        worst <= 1e-4,
        format!("20 cases, max relative error {worst:e}"),
    ))
}

fn metrics_against_loops(seed: u64) -> Result<Check> {
    let mut rng = seed::rng(seed, "verify-metrics", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(2..8);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..=i).map(|_| rng.gen::<f64>()).collect()).collect();
        let m = AccuracyMatrix::from_rows(rows.clone())?;
        worst = worst
            .max((faa(&m)? - oracles::faa_naive(&rows)).abs())
            .max((forgetting(&m)? - oracles::forgetting_naive(&rows)).abs());
    }
    Ok(check(
        "faa-forgetting",
        worst <= 1e-12,
        format!("50 matrices, max deviation {worst:e}"),
    ))
}

fn reservoir_residency(seed: u64) -> Result<Check> {
    let freq = oracles::reservoir_residency(10, 100, 4_000, seed)?;
    let sigma = (0.1f64 * 0.9 / 4_000.0).sqrt();
    let worst = freq.iter().map(|f| (f - 0.1).abs() / sigma).fold(0.0, f64::max);
    Ok(check(
        "reservoir-uniformity",
        worst <= 4.5,
        format!("capacity 10, 100 offers, 4000 trials, max deviation {worst:.2} sigma"),
    ))
}

fn replacement_closed_form(seed: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for n_c in [10, 50, 100] {
        let r = theorem2_replacement_suite(500, 10, n_c, 20_000, seed)?;
        let rel =
            (r.monte_carlo.expected_replaced - r.closed_form.expected_replaced).abs() / r.closed_form.expected_replaced;
        worst = worst.max(rel);
    }
    Ok(check(
        "replacement",
        worst <= 0.1,
        format!("max relative deviation {worst:.4}"),
    ))
}

fn alignment_monotone(seed: u64) -> Result<Check> {
    let s = super::diagnose::random_pair_diagnostics(100, 32, seed)?;
    Ok(check(
        "alignment",
        s.all_non_decreasing && s.max_eta_at_one_error <= 1e-9,
        format!(
            "100 pairs, non-decreasing {}, max |eta(1) - 1| {:e}",
            s.all_non_decreasing, s.max_eta_at_one_error
        ),
    ))
}

pub fn run_checks(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        ks_against_brute_force(seed)?,
        p_value_against_permutations(seed),
        gradients_against_finite_differences()?,
        metrics_against_loops(seed)?,
        reservoir_residency(seed)?,
        replacement_closed_form(seed)?,
        alignment_monotone(seed)?,
    ])
}
