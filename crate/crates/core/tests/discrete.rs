//! Discrete valuation dynamics: paths, long-run limits and withdrawals.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use valuation_lab::discrete::{
    check_lln, earnings_linked_stats, geometric_ergodicity_estimate, log_growth_constant_fraction,
    path_from_components, simulate_ar1, stationary_moments, sustainability_bounds, DiscreteModelSpec, Noise,
    WithdrawalProcess,
};
use valuation_lab::stats::{mean, variance};

/// Bubble-measure parameters as published (alpha from `h (1 - beta)`).
fn published_spec() -> DiscreteModelSpec {
    DiscreteModelSpec::new(-0.1875 * (1.0 - 0.8685), 0.8685, 0.04668, 0.1697)
}

#[test]
fn constant_returns_compound() {
    let b = vec![0.0; 11];
    let g = vec![0.07; 10];
    let p = path_from_components(&b, &g, 0.0, &WithdrawalProcess::None).unwrap();
    assert_abs_diff_eq!(p.v[10], 0.7f64.exp(), epsilon = 1e-12);
    let p = path_from_components(&b[..2], &g[..1], 0.0, &WithdrawalProcess::ConstantFraction(0.04)).unwrap();
    assert_abs_diff_eq!(p.v[1], 0.07f64.exp() * 0.96, epsilon = 1e-15);
    assert_abs_diff_eq!(p.v[1], 1.03, epsilon = 0.005);
}

#[test]
fn ruin_requires_strictly_negative_wealth() {
    let b = vec![0.0; 4];
    let g = vec![0.0; 3];
    // Withdrawing everything leaves exactly zero, which is not yet negative.
    let p = path_from_components(&b, &g, 0.0, &WithdrawalProcess::ConstantReal(1.0)).unwrap();
    assert_eq!(p.v[1], 0.0);
    assert_eq!(p.ruined_at, Some(2));
    let p = path_from_components(&b, &g, 0.0, &WithdrawalProcess::ConstantReal(1.01)).unwrap();
    assert_eq!(p.ruined_at, Some(1));
    assert_eq!(p.v.len(), 2);
}

#[test]
fn path_length_mismatch() {
    assert!(path_from_components(&[0.0; 3], &[0.0; 3], 0.0, &WithdrawalProcess::None).is_err());
}

#[test]
fn noiseless_lln_is_exact() {
    let spec = DiscreteModelSpec::new(0.1, 0.5, 0.03, 0.0);
    let r = check_lln(&spec, spec.long_run_mean(), 50, 0.02, 1e-12, 0).unwrap();
    assert!(r.delta_ok && r.b_ok && r.r_ok);
}

#[test]
fn stationary_moment_formulas() {
    let m = stationary_moments(&DiscreteModelSpec::new(0.2, 0.5, 0.0, 0.0)).unwrap();
    assert_eq!(m.variance, 0.0);
    assert_abs_diff_eq!(m.mean, 0.4, epsilon = 1e-15);
    let m = stationary_moments(&DiscreteModelSpec::new(0.0, 1e-9, 0.0, 0.3)).unwrap();
    assert_abs_diff_eq!(m.variance, 0.09, epsilon = 1e-12);
    let spec = published_spec();
    let m = stationary_moments(&spec).unwrap();
    assert_abs_diff_eq!(m.mean, -0.1875, epsilon = 1e-12);
    assert_abs_diff_eq!(m.variance, 0.1697f64.powi(2) / (1.0 - 0.8685f64.powi(2)), epsilon = 1e-15);
}

#[test]
fn long_path_matches_stationary_variance() {
    let spec = published_spec();
    let b = simulate_ar1(&spec, spec.long_run_mean(), 1_000_000, 0).unwrap();
    let target = stationary_moments(&spec).unwrap().variance;
    assert!((variance(&b) / target - 1.0).abs() < 0.02);
    assert!((mean(&b) - spec.long_run_mean()).abs() < 0.01);
}

#[test]
fn noiseless_relaxation_is_geometric() {
    let spec = DiscreteModelSpec::new(-0.025, 0.8685, 0.04668, 0.0);
    let h = spec.long_run_mean();
    let b = simulate_ar1(&spec, h + 1.0, 30, 5).unwrap();
    for (t, x) in b.iter().enumerate() {
        assert_abs_diff_eq!(x - h, 0.8685f64.powi(t as i32), epsilon = 1e-12);
    }
}

#[test]
fn ergodicity_distance_decays() {
    let spec = published_spec();
    let h = spec.long_run_mean();
    let tv = geometric_ergodicity_estimate(&spec, h - 0.5, h + 0.5, 40, 10_000, 3).unwrap();
    assert!(tv[0] > 0.9);
    assert!(tv[40] < 0.05, "{}", tv[40]);
    let same = geometric_ergodicity_estimate(&spec, h, h, 10, 10_000, 3).unwrap();
    assert!(same.iter().all(|d| *d < 0.05));
    let frozen = DiscreteModelSpec::new(0.0, 0.5, 0.0, 0.0);
    let exact = geometric_ergodicity_estimate(&frozen, 0.0, 1.0, 20, 10, 0).unwrap();
    assert!(exact.iter().all(|d| *d == 1.0));
}

#[test]
fn sustainability_thresholds() {
    let b = sustainability_bounds(0.0, 0.0);
    assert_eq!((b.safe_rate, b.unsafe_rate), (0.0, 0.0));
    let b = sustainability_bounds(0.04668, 0.01773);
    assert_abs_diff_eq!(b.safe_rate, 1.0 - (-0.06441f64).exp(), epsilon = 1e-12);
    assert_abs_diff_eq!(b.safe_rate, 0.0624, epsilon = 1e-4);
    assert_abs_diff_eq!(b.unsafe_rate, 0.06441, epsilon = 1e-12);
    let b = sustainability_bounds(2f64.ln(), 0.0);
    assert_abs_diff_eq!(b.safe_rate, 0.5, epsilon = 1e-15);
}

#[test]
fn sustainability_signs_on_long_paths() {
    let spec = published_spec();
    let g = 0.01773;
    let bounds = sustainability_bounds(spec.c, g);
    for seed in 0..20 {
        let below = log_growth_constant_fraction(&spec, g, bounds.safe_rate - 0.002, 100_000, seed).unwrap();
        let above = log_growth_constant_fraction(&spec, g, bounds.unsafe_rate + 0.002, 100_000, seed).unwrap();
        assert!(below > 0.0, "seed {seed}: {below}");
        assert!(above < 0.0, "seed {seed}: {above}");
    }
}

#[test]
fn earnings_linked_basics() {
    let s = earnings_linked_stats(0.03, &[0.03; 5]).unwrap();
    assert!(s.w_series.iter().all(|w| w.abs() < 1e-15));
    assert_abs_diff_eq!(s.mean_withdrawal, 0.0, epsilon = 1e-15);
}

#[test]
fn empirical_noise_resamples_residuals() {
    let mut spec = DiscreteModelSpec::new(0.0, 0.5, 0.0, 1.0);
    spec.noise = Noise::Empirical(vec![-1.0, 1.0]);
    let b = simulate_ar1(&spec, 0.0, 200, 9).unwrap();
    for w in b.windows(2) {
        let eps = w[1] - 0.5 * w[0];
        assert!((eps.abs() - 1.0).abs() < 1e-12);
    }
}

fn growth(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.2f64..0.2, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn returns_split_into_yield_and_growth(g in growth(30), seed in 0u64..1000, c in -0.05f64..0.1) {
        let spec = DiscreteModelSpec::new(-0.02, 0.87, c, 0.17);
        let b = simulate_ar1(&spec, 0.0, 30, seed).unwrap();
        let p = path_from_components(&b, &g, c, &WithdrawalProcess::None).unwrap();
        let mut log_v = 0.0;
        for t in 0..30 {
            prop_assert_eq!(p.r[t], p.delta[t] + p.g[t]);
            log_v += p.r[t];
            prop_assert!((p.v[t + 1].ln() - log_v).abs() < 1e-10);
        }
    }

    #[test]
    fn earnings_linked_wealth_telescopes(g in growth(40), seed in 0u64..1000, w in -0.05f64..0.08) {
        let spec = published_spec();
        let b = simulate_ar1(&spec, 0.3, 40, seed).unwrap();
        let p = path_from_components(&b, &g, spec.c, &WithdrawalProcess::EarningsLinked(w)).unwrap();
        let expect = b[40] - b[0] + (spec.c + w) * 40.0;
        prop_assert!((p.v[40].ln() - expect).abs() < 1e-10);
    }

    #[test]
    fn seeded_paths_are_identical(seed in any::<u64>()) {
        let spec = published_spec();
        let a = simulate_ar1(&spec, 0.0, 100, seed).unwrap();
        let b = simulate_ar1(&spec, 0.0, 100, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
