//! Ruin surfaces and the stock / risk-free portfolio rule.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use valuation_lab::discrete::DiscreteModelSpec;
use valuation_lab::market_data::{bundled_rates, bundled_table, real_riskfree};
use valuation_lab::report::HistoricalAnalysis;
use valuation_lab::rng::sim_rng;
use valuation_lab::ruin::{
    block_bootstrap_growth, block_start, parse_surface_csv, portfolio_ruin, portfolio_rule_share, ruin_surface, PiMode,
    PortfolioRuleConfig, RuinConfig,
};
use valuation_lab::stats::special::chi2_sf;
use valuation_lab::Error;

fn published_spec() -> DiscreteModelSpec {
    DiscreteModelSpec::new(-0.1875 * (1.0 - 0.8685), 0.8685, 0.04668, 0.1697)
}

fn history() -> Vec<f64> {
    HistoricalAnalysis::new(&bundled_table(), 10).unwrap().derived.real_growth()
}

fn config(b0: f64, n_sims: usize, seed: u64) -> RuinConfig {
    RuinConfig {
        model: published_spec(),
        b0,
        horizons: vec![10, 20, 30, 40, 50],
        withdrawal_grid: vec![0.0, 0.03, 0.035, 0.04, 0.045, 0.05, 0.06],
        n_sims,
        master_seed: seed,
        growth_history: history(),
    }
}

fn portfolio_config(mode: PiMode, n_sims: usize) -> PortfolioRuleConfig {
    let raw = bundled_table();
    PortfolioRuleConfig {
        gamma_grid: vec![2.0, 3.0, 4.0, 5.0, 6.0],
        withdrawal_rate: 0.05,
        horizon: 30,
        riskfree_series: real_riskfree(&raw, &bundled_rates(), 10).unwrap(),
        model: published_spec(),
        b0: -0.1875,
        n_sims,
        master_seed: 0,
        growth_history: history(),
        mode,
        clamp: None,
    }
}

#[test]
fn single_year_blocks_are_uniform() {
    let n_years = 139;
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut counts = vec![0.0; n_years];
    for _ in 0..draws {
        counts[block_start(n_years, 1, &mut rng).unwrap()] += 1.0;
    }
    let expected = draws as f64 / n_years as f64;
    let stat: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    assert!(chi2_sf(stat, (n_years - 1) as f64) > 0.01, "{stat}");
}

#[test]
fn block_bootstrap_edges() {
    let h: Vec<f64> = (0..20).map(f64::from).collect();
    let mut rng = sim_rng(1, 2);
    assert_eq!(block_bootstrap_growth(&h, 20, &mut rng).unwrap(), h);
    let block = block_bootstrap_growth(&h, 7, &mut rng).unwrap();
    assert!(block.windows(2).all(|w| w[1] == w[0] + 1.0));
    assert!(matches!(block_bootstrap_growth(&h, 21, &mut rng), Err(Error::WindowTooLarge { .. })));
    let a = block_bootstrap_growth(&h, 5, &mut sim_rng(9, 4)).unwrap();
    let b = block_bootstrap_growth(&h, 5, &mut sim_rng(9, 4)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_withdrawal_never_ruins() {
    let s = ruin_surface(&config(-0.1875, 2000, 1)).unwrap();
    for t in [10, 20, 30, 40, 50] {
        assert_eq!(s.get(0.0, t), Some(0.0));
    }
}

#[test]
fn surface_is_monotone_in_rate_and_horizon() {
    let n = 4000;
    let s = ruin_surface(&config(-0.1875, n, 5)).unwrap();
    let tol = 3.0 / (n as f64).sqrt();
    let c = config(0.0, 1, 0);
    for &t in &c.horizons {
        // Common random numbers make the rate ordering exact.
        for w in c.withdrawal_grid.windows(2) {
            assert!(s.get(w[1], t).unwrap() >= s.get(w[0], t).unwrap());
        }
    }
    for &w in &c.withdrawal_grid {
        for t in c.horizons.windows(2) {
            assert!(s.get(w, t[1]).unwrap() + tol >= s.get(w, t[0]).unwrap());
        }
    }
}

#[test]
fn four_percent_over_thirty_years_is_safe() {
    let n = 10_000;
    let s = ruin_surface(&config(-0.1875, n, 0)).unwrap();
    let p = s.get(0.04, 30).unwrap();
    assert!(p < 0.10, "{p}");
    // A lower start of valuation lowers every cell.
    let cheap = ruin_surface(&config(-0.3434, n, 0)).unwrap();
    for (a, b) in cheap.entries.iter().zip(&s.entries) {
        assert!(a.ruin_prob <= b.ruin_prob);
    }
}

#[test]
fn surfaces_are_reproducible_and_converge() {
    let a = ruin_surface(&config(-0.1875, 1000, 7)).unwrap();
    let b = ruin_surface(&config(-0.1875, 1000, 7)).unwrap();
    assert_eq!(a, b);
    let big = ruin_surface(&config(-0.1875, 4000, 7)).unwrap();
    let tol = 2.0 / 1000f64.sqrt();
    let close = a.entries.iter().zip(&big.entries).filter(|(x, y)| (x.ruin_prob - y.ruin_prob).abs() < tol).count();
    assert!(close as f64 >= 0.95 * a.entries.len() as f64);
}

#[test]
fn surface_csv_round_trips() {
    let s = ruin_surface(&config(-0.1875, 200, 3)).unwrap();
    let (cells, n) = parse_surface_csv(s.to_csv().as_bytes()).unwrap();
    assert_eq!(n, 200);
    assert_eq!(cells, s.entries);
}

#[test]
fn horizon_longer_than_history_is_rejected() {
    let mut c = config(0.0, 10, 0);
    c.horizons = vec![c.growth_history.len()];
    assert!(matches!(ruin_surface(&c), Err(Error::WindowTooLarge { .. })));
    c.horizons = vec![30];
    c.n_sims = 0;
    assert!(ruin_surface(&c).is_err());
}

#[test]
fn share_formula_limits() {
    let m = published_spec();
    let (g, rho) = (0.01773, 0.03689);
    let pi = portfolio_rule_share(-0.1875, &m, 3.0, rho, 0.01, g, PiMode::Printed);
    let by_hand = 1.0 / 6.0 + (g + m.alpha - m.beta * -0.1875 - 0.01) / (3.0 * (0.1697f64.powi(2) + rho * rho));
    assert_abs_diff_eq!(pi, by_hand, epsilon = 1e-14);
    let big = portfolio_rule_share(-0.1875, &m, 1e12, rho, 0.01, g, PiMode::Printed);
    assert!(big.abs() < 1e-9);
    let r = g + m.c + m.alpha + (m.beta - 1.0) * 0.2;
    let neutral = portfolio_rule_share(0.2, &m, 2.0, rho, r, g, PiMode::DriftConsistent);
    assert_abs_diff_eq!(neutral, 0.25, epsilon = 1e-14);
}

#[test]
fn all_stock_portfolio_matches_plain_ruin() {
    let mut pc = portfolio_config(PiMode::Constant(1.0), 3000);
    pc.gamma_grid = vec![1.0];
    let port = portfolio_ruin(&pc).unwrap();
    let rc = RuinConfig {
        model: pc.model.clone(),
        b0: pc.b0,
        horizons: vec![30],
        withdrawal_grid: vec![0.05],
        n_sims: pc.n_sims,
        master_seed: pc.master_seed,
        growth_history: pc.growth_history.clone(),
    };
    assert_eq!(port[0].ruin_prob, ruin_surface(&rc).unwrap().get(0.05, 30).unwrap());
}

#[test]
fn riskless_portfolio_is_deterministic_given_block() {
    // With pi = 0 only the risk-free block matters; a flat positive rate
    // covering the withdrawal never ruins.
    let mut pc = portfolio_config(PiMode::Constant(0.0), 500);
    pc.riskfree_series = vec![0.06; pc.growth_history.len()];
    let res = portfolio_ruin(&pc).unwrap();
    assert!(res.iter().all(|r| r.ruin_prob == 0.0));
}

#[test]
fn longer_horizon_is_riskier_for_portfolio_rule() {
    let mut pc = portfolio_config(PiMode::DriftConsistent, 4000);
    let short = portfolio_ruin(&pc).unwrap();
    pc.horizon = 50;
    let long = portfolio_ruin(&pc).unwrap();
    for (s, l) in short.iter().zip(&long) {
        assert!(l.ruin_prob > s.ruin_prob, "gamma {}: {} vs {}", s.gamma, l.ruin_prob, s.ruin_prob);
    }
}

#[test]
fn portfolio_validation() {
    let mut pc = portfolio_config(PiMode::Printed, 10);
    pc.gamma_grid = vec![0.0];
    assert!(portfolio_ruin(&pc).is_err());
    let mut pc = portfolio_config(PiMode::Printed, 10);
    pc.riskfree_series.pop();
    assert!(matches!(portfolio_ruin(&pc), Err(Error::LengthMismatch { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cheaper_start_never_adds_ruin(lo in -1.0f64..0.5, gap in 0.01f64..0.8, seed in 0u64..10_000) {
        let mut a = config(lo, 300, seed);
        let mut b = config(lo + gap, 300, seed);
        a.horizons = vec![30];
        b.horizons = vec![30];
        let sa = ruin_surface(&a).unwrap();
        let sb = ruin_surface(&b).unwrap();
        for (x, y) in sa.entries.iter().zip(&sb.entries) {
            prop_assert!(x.ruin_prob <= y.ruin_prob);
        }
    }

    #[test]
    fn same_seed_same_surface(seed in any::<u64>()) {
        let mut c = config(-0.1875, 100, seed);
        c.horizons = vec![20];
        prop_assert_eq!(ruin_surface(&c).unwrap(), ruin_surface(&c).unwrap());
    }
}
