//! Monte Carlo and permutation oracles for the statistical routines.

use driftcl::drift::ks_p_value;
use driftcl::memory::{expected_replaced, replace_all_probability};
use driftcl::metrics::theorem2_replacement_suite;
use driftcl::oracles;

#[test]
fn asymptotic_p_value_agrees_with_permutation_test() {
    let asymptotic = ks_p_value(0.2, 100, 100);
    let permuted = oracles::ks_permutation_p_value(0.2, 100, 100, 10_000, 7);
    assert!((asymptotic - permuted).abs() <= 0.02, "{asymptotic} vs {permuted}");
}

#[test]
fn small_reservoir_keeps_each_item_with_probability_capacity_over_n() {
    let freq = oracles::reservoir_residency(5, 100, 20_000, 8).unwrap();
    for (i, f) in freq.iter().enumerate() {
        assert!((f - 0.05).abs() <= 0.01, "item {i}: {f}");
    }
    let total: f64 = freq.iter().sum();
    assert!((total - 5.0).abs() < 1e-9);
}

#[test]
fn expected_replacements_match_simulation() {
    let r = theorem2_replacement_suite(500, 10, 50, 50_000, 9).unwrap();
    assert!((r.closed_form.expected_replaced - 4.7626).abs() < 1e-3);
    assert!((r.monte_carlo.expected_replaced / r.closed_form.expected_replaced - 1.0).abs() <= 0.1);
}

#[test]
fn replace_all_needs_enough_new_samples() {
    for n_c in [1, 10, 49] {
        let r = theorem2_replacement_suite(500, 10, n_c, 2_000, 1).unwrap();
        assert_eq!(r.closed_form.p_replace_all, 0.0);
        assert_eq!(r.monte_carlo.p_replace_all, 0.0);
    }
}

// The hypergeometric ratio counts n_c distinct slot hits, so check it against
// sampling slots without replacement rather than the reservoir simulation.
#[test]
fn replace_all_matches_distinct_hit_sampling() {
    use rand::{seq::index::sample, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    for (capacity, slots, n_c) in [(4, 2, 3), (10, 3, 6), (12, 4, 12)] {
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| sample(&mut rng, capacity, n_c).iter().filter(|&j| j < slots).count() == slots)
            .count();
        let closed = replace_all_probability(capacity, slots, n_c as u64);
        let mc = hits as f64 / trials as f64;
        assert!((mc - closed).abs() < 0.01, "{capacity}/{slots}/{n_c}: {mc} vs {closed}");
    }
}

#[test]
fn nothing_offered_nothing_replaced() {
    let r = theorem2_replacement_suite(500, 10, 0, 100, 0).unwrap();
    assert_eq!(r.closed_form.p_replaced, 0.0);
    assert_eq!(r.closed_form.expected_replaced, 0.0);
    assert_eq!(r.closed_form.p_replace_all, 0.0);
    assert_eq!(r.monte_carlo.expected_replaced, 0.0);
    assert_eq!(expected_replaced(500, 10, 0), 0.0);
}
