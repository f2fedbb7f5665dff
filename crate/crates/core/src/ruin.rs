//! Monte Carlo ruin probabilities for constant real withdrawals, with and
//! without a risk-free asset.
//!
//! Simulation `i` draws everything from `sim_rng(master_seed, i)`: first the
//! start of the historical growth block, then the AR(1) innovations. The same
//! draws are reused for every withdrawal rate and every risk-aversion level,
//! so comparisons across those axes use common random numbers.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{simulate_ar1_with, DiscreteModelSpec};
use crate::error::{Error, Result};
use crate::rng::sim_rng;
use crate::stats::descriptive::{mean, std_dev};

/// Uniformly chosen start of a contiguous `t_len`-year block of `history`.
pub fn block_start<R: Rng + ?Sized>(history_len: usize, t_len: usize, rng: &mut R) -> Result<usize> {
    if t_len == 0 || t_len > history_len {
        return Err(Error::WindowTooLarge { window: t_len, len: history_len });
    }
    Ok(rng.random_range(0..=history_len - t_len))
}

/// One contiguous block of `t_len` consecutive growth values.
pub fn block_bootstrap_growth<R: Rng + ?Sized>(history: &[f64], t_len: usize, rng: &mut R) -> Result<Vec<f64>> {
    let start = block_start(history.len(), t_len, rng)?;
    Ok(history[start..start + t_len].to_vec())
}

/// Settings for a ruin-probability surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuinConfig {
    pub model: DiscreteModelSpec,
    pub b0: f64,
    pub horizons: Vec<usize>,
    /// Constant real withdrawal rates as fractions of initial wealth.
    pub withdrawal_grid: Vec<f64>,
    pub n_sims: usize,
    pub master_seed: u64,
    /// Historical growth `G(t)` from which blocks are drawn.
    pub growth_history: Vec<f64>,
}

impl RuinConfig {
    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n_sims == 0 {
            return Err(Error::InvalidParameter("n_sims must be at least 1".into()));
        }
        for &t in &self.horizons {
            if t == 0 || t + 1 > self.growth_history.len() {
                return Err(Error::WindowTooLarge { window: t, len: self.growth_history.len() });
            }
        }
        Ok(())
    }
}

/// Ruin probability for one `(rate, horizon)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuinCell {
    pub rate: f64,
    pub horizon: usize,
    pub ruin_prob: f64,
}

/// Ruin probabilities over a grid of rates and horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuinSurface {
    /// Ordered by horizon, then by rate.
    pub entries: Vec<RuinCell>,
    pub n_sims: usize,
    pub b0: f64,
    pub master_seed: u64,
}

impl RuinSurface {
    pub fn get(&self, rate: f64, horizon: usize) -> Option<f64> {
        self.entries.iter().find(|c| c.rate == rate && c.horizon == horizon).map(|c| c.ruin_prob)
    }

    /// CSV with header `rate,horizon,ruin_prob,n_sims`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rate,horizon,ruin_prob,n_sims\n");
        for c in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", c.rate, c.horizon, c.ruin_prob, self.n_sims));
        }
        out
    }
}

/// Parse a `rate,horizon,ruin_prob,n_sims` CSV back into cells and `n_sims`.
pub fn parse_surface_csv(content: &[u8]) -> Result<(Vec<RuinCell>, usize)> {
    let mut reader = csv::Reader::from_reader(content);
    let mut cells = Vec::new();
    let mut n = 0;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::MalformedRow { line, message: e.to_string() })?;
        let bad = |m: &str| Error::MalformedRow { line, message: m.to_string() };
        let rate: f64 = rec.get(0).and_then(|c| c.parse().ok()).ok_or_else(|| bad("rate"))?;
        let horizon: usize = rec.get(1).and_then(|c| c.parse().ok()).ok_or_else(|| bad("horizon"))?;
        let ruin_prob: f64 = rec.get(2).and_then(|c| c.parse().ok()).ok_or_else(|| bad("ruin_prob"))?;
        n = rec.get(3).and_then(|c| c.parse().ok()).ok_or_else(|| bad("n_sims"))?;
        cells.push(RuinCell { rate, horizon, ruin_prob });
    }
    Ok((cells, n))
}

/// Draws shared by every cell of simulation `i` at horizon `t_len`.
struct Scenario {
    b: Vec<f64>,
    start: usize,
}

fn scenario(model: &DiscreteModelSpec, b0: f64, history_len: usize, t_len: usize, seed: u64, i: u64) -> Scenario {
    let mut rng = sim_rng(seed, i);
    let start = rng.random_range(0..=history_len - t_len);
    let b = simulate_ar1_with(model, b0, t_len, &mut rng);
    Scenario { b, start }
}

/// Whether wealth under constant real withdrawal `w` goes negative.
fn ruined(b: &[f64], g: &[f64], c: f64, w: f64) -> bool {
    let mut v = 1.0;
    for t in 1..b.len() {
        v = v * (b[t] - b[t - 1] + c + g[t - 1]).exp() - w;
        if v < 0.0 {
            return true;
        }
    }
    false
}

/// Ruin probabilities for every `(rate, horizon)` pair.
pub fn ruin_surface(config: &RuinConfig) -> Result<RuinSurface> {
    config.validate()?;
    let hist = &config.growth_history;
    let n_rates = config.withdrawal_grid.len();
    let n_cells = n_rates * config.horizons.len();
    let counts = (0..config.n_sims as u64)
        .into_par_iter()
        .map(|i| {
            let mut hits = vec![0u32; n_cells];
            for (hi, &t_len) in config.horizons.iter().enumerate() {
                let sc = scenario(&config.model, config.b0, hist.len(), t_len, config.master_seed, i);
                let g = &hist[sc.start..sc.start + t_len];
                for (ri, &w) in config.withdrawal_grid.iter().enumerate() {
                    if ruined(&sc.b, g, config.model.c, w) {
                        hits[hi * n_rates + ri] = 1;
                    }
                }
            }
            hits
        })
        .reduce(|| vec![0u32; n_cells], sum_counts);
    let n = config.n_sims as f64;
    let mut entries = Vec::with_capacity(n_cells);
    for (hi, &horizon) in config.horizons.iter().enumerate() {
        for (ri, &rate) in config.withdrawal_grid.iter().enumerate() {
            entries.push(RuinCell { rate, horizon, ruin_prob: counts[hi * n_rates + ri] as f64 / n });
        }
    }
    Ok(RuinSurface { entries, n_sims: config.n_sims, b0: config.b0, master_seed: config.master_seed })
}

fn sum_counts(mut a: Vec<u32>, b: Vec<u32>) -> Vec<u32> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Formula for the stock share.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiMode {
    /// `1/(2γ) + (g + alpha - beta b - r) / (γ(σ² + ρ²))`.
    #[default]
    Printed,
    /// `1/(2γ) + (g + c + alpha + (beta - 1) b - r) / (γ(σ² + ρ²))`, using
    /// the expected change of the AR(1) as the valuation drift.
    DriftConsistent,
    /// A fixed share regardless of state.
    Constant(f64),
}

/// Stock-share rule for one risk-aversion level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioRule {
    pub gamma: f64,
    /// Standard deviation of fundamental growth.
    pub rho: f64,
    pub mode: PiMode,
    /// Optional `[lo, hi]` bounds on the share.
    pub clamp: Option<(f64, f64)>,
}

impl PortfolioRule {
    /// Share invested in stocks given valuation `b`, real rate `r` and mean growth `g`.
    pub fn share(&self, model: &DiscreteModelSpec, b: f64, r: f64, g: f64) -> f64 {
        let pi = portfolio_rule_share(b, model, self.gamma, self.rho, r, g, self.mode);
        match self.clamp {
            Some((lo, hi)) => pi.clamp(lo, hi),
            None => pi,
        }
    }
}

/// Stock share for valuation `b`, risk aversion `gamma`, growth sd `rho`,
/// real rate `r` and mean growth `g`.
pub fn portfolio_rule_share(b: f64, model: &DiscreteModelSpec, gamma: f64, rho: f64, r: f64, g: f64, mode: PiMode) -> f64 {
    let var = model.sigma_eps.powi(2) + rho * rho;
    let excess = match mode {
        PiMode::Printed => g + model.alpha - model.beta * b - r,
        PiMode::DriftConsistent => g + model.c + model.alpha + (model.beta - 1.0) * b - r,
        PiMode::Constant(pi) => return pi,
    };
    1.0 / (2.0 * gamma) + excess / (gamma * var)
}

/// Settings for ruin under the stock / risk-free portfolio rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioRuleConfig {
    pub gamma_grid: Vec<f64>,
    pub withdrawal_rate: f64,
    pub horizon: usize,
    /// Real risk-free log rate aligned with `growth_history`.
    pub riskfree_series: Vec<f64>,
    pub model: DiscreteModelSpec,
    pub b0: f64,
    pub n_sims: usize,
    pub master_seed: u64,
    pub growth_history: Vec<f64>,
    #[serde(default)]
    pub mode: PiMode,
    #[serde(default)]
    pub clamp: Option<(f64, f64)>,
}

impl PortfolioRuleConfig {
    /// Empirical sd of the growth history (`ρ`).
    pub fn rho(&self) -> f64 {
        std_dev(&self.growth_history)
    }

    /// Mean of the growth history (`g`).
    pub fn g_mean(&self) -> f64 {
        mean(&self.growth_history)
    }

    pub fn rule(&self, gamma: f64) -> PortfolioRule {
        PortfolioRule { gamma, rho: self.rho(), mode: self.mode, clamp: self.clamp }
    }
}

/// Ruin probability of the portfolio rule for one risk-aversion level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioRuin {
    pub gamma: f64,
    pub ruin_prob: f64,
}

/// Ruin probability for each `gamma` in the grid.
///
/// Each year the stock share `π` is set from the valuation at the start of
/// the year; wealth then becomes `V (π e^R + (1-π) e^r) - w`. Growth and
/// risk-free rates come from the same historical block.
pub fn portfolio_ruin(config: &PortfolioRuleConfig) -> Result<Vec<PortfolioRuin>> {
    config.model.validate()?;
    let hist = &config.growth_history;
    if config.riskfree_series.len() != hist.len() {
        return Err(Error::LengthMismatch { left: config.riskfree_series.len(), right: hist.len() });
    }
    if config.n_sims == 0 {
        return Err(Error::InvalidParameter("n_sims must be at least 1".into()));
    }
    if config.horizon == 0 || config.horizon > hist.len() {
        return Err(Error::WindowTooLarge { window: config.horizon, len: hist.len() });
    }
    if config.gamma_grid.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }
    let g_mean = config.g_mean();
    let rules: Vec<PortfolioRule> = config.gamma_grid.iter().map(|&g| config.rule(g)).collect();
    let t_len = config.horizon;
    let counts = (0..config.n_sims as u64)
        .into_par_iter()
        .map(|i| {
            let sc = scenario(&config.model, config.b0, hist.len(), t_len, config.master_seed, i);
            let g = &hist[sc.start..sc.start + t_len];
            let rf = &config.riskfree_series[sc.start..sc.start + t_len];
            rules
                .iter()
                .map(|rule| {
                    let mut v = 1.0;
                    for t in 1..=t_len {
                        let pi = rule.share(&config.model, sc.b[t - 1], rf[t - 1], g_mean);
                        let r_stock = sc.b[t] - sc.b[t - 1] + config.model.c + g[t - 1];
                        v = v * (pi * r_stock.exp() + (1.0 - pi) * rf[t - 1].exp()) - config.withdrawal_rate;
                        if v < 0.0 {
                            return 1u32;
                        }
                    }
                    0u32
                })
                .collect::<Vec<_>>()
        })
        .reduce(|| vec![0u32; rules.len()], sum_counts);
    let n = config.n_sims as f64;
    Ok(config
        .gamma_grid
        .iter()
        .zip(counts)
        .map(|(&gamma, k)| PortfolioRuin { gamma, ruin_prob: k as f64 / n })
        .collect())
}

/// CSV with header `gamma,rate,horizon,ruin_prob,n_sims`.
pub fn portfolio_ruin_csv(config: &PortfolioRuleConfig, result: &[PortfolioRuin]) -> String {
    let mut out = String::from("gamma,rate,horizon,ruin_prob,n_sims\n");
    for r in result {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.gamma, config.withdrawal_rate, config.horizon, r.ruin_prob, config.n_sims
        ));
    }
    out
}
