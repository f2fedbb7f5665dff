//! AR(1) fits, the bubble regression and predictive correlations.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use valuation_lab::market_data::bundled_table;
use valuation_lab::report::HistoricalAnalysis;
use valuation_lab::stats::TestName;
use valuation_lab::valuation::{fit_ar1, fit_bubble, fit_tr_cape, predictive_correlation, student_t_slope_test};

fn ar1_path(alpha: f64, beta: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut x = vec![alpha / (1.0 - beta)];
    for _ in 1..n {
        let prev = *x.last().unwrap();
        x.push(alpha + beta * prev + noise.sample(&mut rng));
    }
    x
}

#[test]
fn tr_cape_fit_on_bundled_data() {
    let a = HistoricalAnalysis::new(&bundled_table(), 10).unwrap();
    assert_abs_diff_eq!(a.tr_cape.alpha, 0.34452, epsilon = 0.005);
    assert_abs_diff_eq!(a.tr_cape.beta, 0.88321, epsilon = 0.005);
    assert_abs_diff_eq!(a.tr_cape.sigma_eps, 0.16907, epsilon = 0.005);
    let p = |target: &str, name: TestName| {
        a.tr_cape.diagnostics.iter().filter(|d| d.target == target && d.report.name == name).count()
    };
    assert_eq!(p("residuals", TestName::LjungBox), 4);
    assert_eq!(p("abs_residuals", TestName::LjungBox), 4);
    assert_eq!(p("series", TestName::Adf), 1);
}

#[test]
fn bubble_slope_and_trend_on_bundled_data() {
    let a = HistoricalAnalysis::new(&bundled_table(), 10).unwrap();
    let b = &a.bubble;
    assert_abs_diff_eq!(b.raw_coeffs[1], -0.1315, epsilon = 0.002);
    assert_abs_diff_eq!(b.raw_coeffs[2], 0.0061, epsilon = 0.002);
    assert_abs_diff_eq!(b.c, 0.04668, epsilon = 0.003);
    assert_abs_diff_eq!(b.beta_h, 0.8685, epsilon = 0.005);
    assert_abs_diff_eq!(b.sigma_eps, 0.1697, epsilon = 0.005);
    assert!(b.slope_test(1.0).p_value <= 0.01);
}

#[test]
fn predictive_correlations_on_bundled_data() {
    let a = HistoricalAnalysis::new(&bundled_table(), 10).unwrap();
    let t = a.predictive_table(&[1, 10]).unwrap();
    let get = |m: &str, h: usize| t.iter().find(|(n, hz, _)| n == m && *hz == h).unwrap().2;
    assert_abs_diff_eq!(get("ln_tr_cape", 10), -0.541, epsilon = 0.02);
    assert_abs_diff_eq!(get("ln_cape", 10), -0.538, epsilon = 0.02);
    assert_abs_diff_eq!(get("ln_tr_cape", 1), -0.178, epsilon = 0.02);
    assert_abs_diff_eq!(get("ln_cape", 1), -0.182, epsilon = 0.02);
    assert_abs_diff_eq!(get("bubble", 1), -0.180, epsilon = 0.02);
    assert!(a.cape_tr_cape_correlation() >= 0.99);
}

#[test]
fn noiseless_ar1_recovered_exactly() {
    // A path sitting at the fixed point has a constant regressor.
    let x = ar1_path(0.3, 0.7, 0.0, 40, 0);
    let mut y = vec![5.0];
    for _ in 1..40 {
        y.push(0.3 + 0.7 * y.last().unwrap());
    }
    let fit = fit_ar1(&y).unwrap();
    assert_abs_diff_eq!(fit.alpha, 0.3, epsilon = 1e-9);
    assert_abs_diff_eq!(fit.beta, 0.7, epsilon = 1e-9);
    assert!(fit.sigma_eps < 1e-9);
    assert!(fit_ar1(&x).is_err());
}

#[test]
fn large_sample_ar1_consistency() {
    let x = ar1_path(0.2, 0.8, 0.15, 100_000, 11);
    let fit = fit_ar1(&x).unwrap();
    assert!((fit.alpha - 0.2).abs() < 3.0 * fit.ols.standard_errors[0]);
    assert!((fit.beta - 0.8).abs() < 3.0 * fit.ols.standard_errors[1]);
    assert_abs_diff_eq!(fit.sigma_eps, 0.15, epsilon = 0.002);
}

/// Under a unit root the slope t-statistic follows the Dickey-Fuller law
/// (median near -1.57 with an intercept), so the Student-t p-value is
/// smaller than nominal: large p-values occur, but not in most replications.
#[test]
fn unit_root_data_follows_dickey_fuller_law() {
    let mut stats = Vec::new();
    let mut large = 0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 0.1).unwrap();
        let mut acc = 0.0;
        let walk: Vec<f64> = (0..150)
            .map(|_| {
                acc += n.sample(&mut rng);
                acc
            })
            .collect();
        let fit = fit_ar1(&walk).unwrap();
        let r = student_t_slope_test(&fit.ols, 1, 1.0);
        stats.push(r.statistic);
        if r.p_value > 0.2 {
            large += 1;
        }
    }
    stats.sort_by(f64::total_cmp);
    let median = 0.5 * (stats[99] + stats[100]);
    assert!((-2.0..-1.1).contains(&median), "{median}");
    assert!((20..100).contains(&large), "{large}");
}

#[test]
fn slope_at_null_gives_unit_p_value() {
    let mut y = vec![2.0];
    for _ in 1..40 {
        y.push(0.1 + 0.5 * y.last().unwrap() + 1e-3 * (y.len() as f64).sin());
    }
    let fit = fit_ar1(&y).unwrap();
    let r = fit.slope_test(fit.beta);
    assert_abs_diff_eq!(r.statistic, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-12);
}

#[test]
fn perfect_negative_predictor() {
    let r: Vec<f64> = (0..40).map(|t| ((t * 7 % 11) as f64).sin()).collect();
    let measure: Vec<f64> = (0..40)
        .map(|t| if t + 3 < 40 { -(r[t + 1] + r[t + 2] + r[t + 3]) / 3.0 } else { f64::NAN })
        .collect();
    assert_abs_diff_eq!(predictive_correlation(&measure, &r, 3).unwrap(), -1.0, epsilon = 1e-12);
}

#[test]
fn bubble_fit_rejects_constant_series() {
    let t: Vec<f64> = (0..40).map(f64::from).collect();
    assert!(fit_bubble(&[1.0; 40], &t).is_err());
}

fn noisy_series(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n).prop_map(|e| {
        let mut x = vec![0.0];
        for v in e.iter().skip(1) {
            x.push(0.1 + 0.6 * x.last().unwrap() + v);
        }
        x
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_moves_intercept_only(x in noisy_series(60), k in -5.0f64..5.0) {
        let base = fit_tr_cape(&x, None).unwrap();
        let shifted: Vec<f64> = x.iter().map(|v| v + k).collect();
        let fit = fit_tr_cape(&shifted, None).unwrap();
        prop_assert!((fit.beta - base.beta).abs() < 1e-9);
        prop_assert!((fit.alpha - (base.alpha + k * (1.0 - base.beta))).abs() < 1e-9);
        prop_assert!((fit.sigma_eps - base.sigma_eps).abs() < 1e-9);
        for (a, b) in fit.diagnostics.iter().zip(&base.diagnostics) {
            prop_assert!((a.report.p_value - b.report.p_value).abs() < 1e-6);
        }
    }

    #[test]
    fn long_run_mean_is_fixed_point(x in noisy_series(50)) {
        let f = fit_ar1(&x).unwrap();
        prop_assert!((f.alpha + f.beta * f.long_run_mean - f.long_run_mean).abs() < 1e-10 * (1.0 + f.long_run_mean.abs()));
        prop_assert!(f.residuals.iter().sum::<f64>().abs() / (f.residuals.len() as f64) < 1e-10);
    }

    #[test]
    fn bubble_round_trip(x in noisy_series(60), trend in -0.1f64..0.1) {
        let t: Vec<f64> = (0..x.len()).map(|i| i as f64 + 10.0).collect();
        let ln_h: Vec<f64> = x.iter().zip(&t).map(|(v, ti)| v + trend * ti).collect();
        let fit = fit_bubble(&ln_h, &t).unwrap();
        let rec = fit.reconstructed_raw();
        for (a, b) in rec.iter().zip(fit.raw_coeffs) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        for (i, b) in fit.b_series.iter().enumerate() {
            prop_assert!((b - (ln_h[i] - fit.c * t[i])).abs() < 1e-12);
        }
    }
}
