//! Discrete-time valuation model: `B(t) = alpha + beta B(t-1) + eps(t)`,
//! implied dividend yield `Δ(t) = B(t) - B(t-1) + c`, total return
//! `R(t) = Δ(t) + G(t)`, and wealth under withdrawals.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::sim_rng;

/// Source of the AR(1) innovations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    /// `eps ~ N(0, sigma_eps²)`.
    #[default]
    Gaussian,
    /// Resample uniformly, with replacement, from the given residuals.
    Empirical(Vec<f64>),
}

/// Source of fundamental growth `G(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GSource {
    /// Contiguous blocks of a historical growth series.
    HistoricalBlocks(Vec<f64>),
    /// Constant growth per year.
    Constant(f64),
}

impl Default for GSource {
    fn default() -> Self {
        GSource::Constant(0.0)
    }
}

/// Parameters of the discrete model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModelSpec {
    pub alpha: f64,
    pub beta: f64,
    /// Trend per year; zero for TR-CAPE mode.
    #[serde(default)]
    pub c: f64,
    pub sigma_eps: f64,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub g_source: GSource,
}

impl DiscreteModelSpec {
    pub fn new(alpha: f64, beta: f64, c: f64, sigma_eps: f64) -> Self {
        Self { alpha, beta, c, sigma_eps, noise: Noise::Gaussian, g_source: GSource::Constant(0.0) }
    }

    /// Check `0 < beta < 1` and `sigma_eps >= 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta must lie in (0,1), got {}", self.beta)));
        }
        if !(self.sigma_eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma_eps must be >= 0, got {}", self.sigma_eps)));
        }
        if let Noise::Empirical(r) = &self.noise {
            if r.is_empty() {
                return Err(Error::InvalidParameter("empirical noise needs residuals".into()));
            }
        }
        Ok(())
    }

    /// Long-run mean `h = alpha / (1 - beta)`.
    pub fn long_run_mean(&self) -> f64 {
        self.alpha / (1.0 - self.beta)
    }

    fn draw_eps<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.noise {
            Noise::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.sigma_eps * z
            }
            Noise::Empirical(res) => res[rng.random_range(0..res.len())],
        }
    }
}

/// Simulate `B(0..=T)` from `b0` with the given generator.
pub fn simulate_ar1_with<R: Rng + ?Sized>(spec: &DiscreteModelSpec, b0: f64, t_max: usize, rng: &mut R) -> Vec<f64> {
    let mut b = Vec::with_capacity(t_max + 1);
    b.push(b0);
    let mut last = b0;
    for _ in 0..t_max {
        last = spec.alpha + spec.beta * last + spec.draw_eps(rng);
        b.push(last);
    }
    b
}

/// Simulate `B(0..=T)` from `b0`, reproducible per seed.
pub fn simulate_ar1(spec: &DiscreteModelSpec, b0: f64, t_max: usize, seed: u64) -> Result<Vec<f64>> {
    if t_max == 0 {
        return Err(Error::InvalidParameter("T must be at least 1".into()));
    }
    spec.validate()?;
    Ok(simulate_ar1_with(spec, b0, t_max, &mut sim_rng(seed, 0)))
}

/// Withdrawal rule applied after each year's growth.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WithdrawalProcess {
    #[default]
    None,
    /// Withdraw fraction `w` of current wealth.
    ConstantFraction(f64),
    /// Withdraw `w` times initial wealth (real terms) each year.
    ConstantReal(f64),
    /// Withdraw fraction `W(t) = 1 - exp(w - G(t))`.
    EarningsLinked(f64),
    /// Withdraw fraction `W(t)` from the given series.
    Custom(Vec<f64>),
}

impl WithdrawalProcess {
    /// Whether every withdrawal fraction lies in (0,1); `None` for real-amount rules.
    pub fn fractions_valid(&self, g: &[f64]) -> Option<bool> {
        match self {
            WithdrawalProcess::None => Some(true),
            WithdrawalProcess::ConstantFraction(w) => Some(*w > 0.0 && *w < 1.0),
            WithdrawalProcess::ConstantReal(_) => None,
            WithdrawalProcess::EarningsLinked(w) => {
                Some(g.iter().all(|gt| {
                    let f = 1.0 - (w - gt).exp();
                    f > 0.0 && f < 1.0
                }))
            }
            WithdrawalProcess::Custom(s) => Some(s.iter().all(|f| *f > 0.0 && *f < 1.0)),
        }
    }
}

/// One simulated trajectory. `b` and `v` have entries for `t = 0..`;
/// `delta`, `g` and `r` for `t = 1..`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPath {
    pub b: Vec<f64>,
    pub delta: Vec<f64>,
    pub g: Vec<f64>,
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    /// First `t` with `V(t) < 0`; the path stops there.
    pub ruined_at: Option<usize>,
}

/// Assemble `Δ`, `R` and `V` from a valuation path `B(0..=T)` and growth `G(1..=T)`.
pub fn path_from_components(b: &[f64], g: &[f64], c: f64, withdrawal: &WithdrawalProcess) -> Result<SimulatedPath> {
    if b.len() != g.len() + 1 {
        return Err(Error::LengthMismatch { left: b.len(), right: g.len() + 1 });
    }
    if let WithdrawalProcess::Custom(s) = withdrawal {
        if s.len() != g.len() {
            return Err(Error::LengthMismatch { left: s.len(), right: g.len() });
        }
    }
    let t_max = g.len();
    let mut path = SimulatedPath {
        b: vec![b[0]],
        delta: Vec::with_capacity(t_max),
        g: Vec::with_capacity(t_max),
        r: Vec::with_capacity(t_max),
        v: vec![1.0],
        ruined_at: None,
    };
    let mut v = 1.0;
    for t in 1..=t_max {
        let delta = b[t] - b[t - 1] + c;
        let r = delta + g[t - 1];
        let grown = v * r.exp();
        v = match withdrawal {
            WithdrawalProcess::None => grown,
            WithdrawalProcess::ConstantFraction(w) => grown * (1.0 - w),
            WithdrawalProcess::ConstantReal(w) => grown - w,
            WithdrawalProcess::EarningsLinked(w) => v * (r + w - g[t - 1]).exp(),
            WithdrawalProcess::Custom(s) => grown * (1.0 - s[t - 1]),
        };
        path.b.push(b[t]);
        path.delta.push(delta);
        path.g.push(g[t - 1]);
        path.r.push(r);
        path.v.push(v);
        if v < 0.0 {
            path.ruined_at = Some(t);
            break;
        }
    }
    Ok(path)
}

impl SimulatedPath {
    /// CSV with header `t,B,Delta,G,R,V`; `t = 0` leaves `Delta,G,R` empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,B,Delta,G,R,V\n");
        out.push_str(&format!("0,{},,,,{}\n", self.b[0], self.v[0]));
        for t in 1..self.b.len() {
            out.push_str(&format!(
                "{t},{},{},{},{},{}\n",
                self.b[t],
                self.delta[t - 1],
                self.g[t - 1],
                self.r[t - 1],
                self.v[t]
            ));
        }
        out
    }
}

/// Sample averages compared with their long-run limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlnReport {
    pub delta_avg: f64,
    pub b_avg: f64,
    pub r_avg: f64,
    pub delta_limit: f64,
    pub b_limit: f64,
    pub r_limit: f64,
    pub delta_ok: bool,
    pub b_ok: bool,
    pub r_ok: bool,
}

/// Check `mean Δ → c`, `mean B → h` and `mean R → c + g` on one path with constant growth `g`.
pub fn check_lln(spec: &DiscreteModelSpec, b0: f64, t_max: usize, g: f64, tol: f64, seed: u64) -> Result<LlnReport> {
    let b = simulate_ar1(spec, b0, t_max, seed)?;
    let n = t_max as f64;
    let delta_avg = (b[t_max] - b[0]) / n + spec.c;
    let b_avg = b[1..].iter().sum::<f64>() / n;
    let r_avg = delta_avg + g;
    let (delta_limit, b_limit, r_limit) = (spec.c, spec.long_run_mean(), spec.c + g);
    Ok(LlnReport {
        delta_avg,
        b_avg,
        r_avg,
        delta_limit,
        b_limit,
        r_limit,
        delta_ok: (delta_avg - delta_limit).abs() < tol,
        b_ok: (b_avg - b_limit).abs() < tol,
        r_ok: (r_avg - r_limit).abs() < tol,
    })
}

/// Stationary mean and variance of the AR(1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Mean `alpha / (1 - beta)` and variance `sigma² / (1 - beta²)`.
pub fn stationary_moments(spec: &DiscreteModelSpec) -> Result<StationaryMoments> {
    spec.validate()?;
    Ok(StationaryMoments {
        mean: spec.long_run_mean(),
        variance: spec.sigma_eps.powi(2) / (1.0 - spec.beta * spec.beta),
    })
}

/// Number of interior bins used by [`geometric_ergodicity_estimate`].
pub const TV_BINS: usize = 20;

/// Total-variation distance between the laws of `B(t)` started at `b0_a`
/// and `b0_b`, for `t = 0..=t_max`.
///
/// Distances are estimated on `TV_BINS` equal bins spanning four stationary
/// standard deviations around `h`, plus two overflow bins. With zero noise
/// the laws are point masses and the distance is exact (0 or 1).
pub fn geometric_ergodicity_estimate(
    spec: &DiscreteModelSpec,
    b0_a: f64,
    b0_b: f64,
    t_max: usize,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let moments = stationary_moments(spec)?;
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be positive".into()));
    }
    if spec.sigma_eps == 0.0 {
        let mut out = Vec::with_capacity(t_max + 1);
        let (mut a, mut b) = (b0_a, b0_b);
        for t in 0..=t_max {
            if t > 0 {
                a = spec.alpha + spec.beta * a;
                b = spec.alpha + spec.beta * b;
            }
            out.push(if a == b { 0.0 } else { 1.0 });
        }
        return Ok(out);
    }
    let sd = moments.variance.sqrt();
    let lo = moments.mean - 4.0 * sd;
    let width = 8.0 * sd / TV_BINS as f64;
    let bin = |x: f64| -> usize {
        if x < lo {
            0
        } else {
            (((x - lo) / width) as usize + 1).min(TV_BINS + 1)
        }
    };
    let histogram = |b0: f64, offset: u64| -> Vec<Vec<u32>> {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = sim_rng(seed.wrapping_add(offset), i);
                simulate_ar1_with(spec, b0, t_max, &mut rng).into_iter().map(bin).collect::<Vec<_>>()
            })
            .fold(
                || vec![vec![0u32; TV_BINS + 2]; t_max + 1],
                |mut acc, bins| {
                    for (t, k) in bins.into_iter().enumerate() {
                        acc[t][k] += 1;
                    }
                    acc
                },
            )
            .reduce(
                || vec![vec![0u32; TV_BINS + 2]; t_max + 1],
                |mut a, b| {
                    for (ra, rb) in a.iter_mut().zip(b) {
                        for (x, y) in ra.iter_mut().zip(rb) {
                            *x += y;
                        }
                    }
                    a
                },
            )
    };
    let ha = histogram(b0_a, 0);
    let hb = histogram(b0_b, n_paths as u64);
    let n = n_paths as f64;
    Ok(ha
        .iter()
        .zip(&hb)
        .map(|(a, b)| 0.5 * a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum::<f64>() / n)
        .collect())
}

/// Withdrawal thresholds for constant-fraction withdrawals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SustainabilityBounds {
    /// Rates below `1 - exp(-c-g)` keep log wealth growing.
    pub safe_rate: f64,
    /// Rates above `c + g` make log wealth decline.
    pub unsafe_rate: f64,
}

pub fn sustainability_bounds(c: f64, g: f64) -> SustainabilityBounds {
    SustainabilityBounds { safe_rate: -(-c - g).exp_m1(), unsafe_rate: c + g }
}

/// `ln V(T) / T` under a constant-fraction withdrawal `w` with constant growth `g`.
///
/// Log wealth is accumulated directly so long horizons do not overflow.
pub fn log_growth_constant_fraction(spec: &DiscreteModelSpec, g: f64, w: f64, t_max: usize, seed: u64) -> Result<f64> {
    if !(0.0..1.0).contains(&w) {
        return Err(Error::InvalidParameter(format!("withdrawal fraction must lie in [0,1), got {w}")));
    }
    let b = simulate_ar1(spec, spec.long_run_mean(), t_max, seed)?;
    let keep = (1.0 - w).ln();
    let mut log_v = 0.0;
    for t in 1..=t_max {
        log_v += b[t] - b[t - 1] + spec.c + g + keep;
    }
    Ok(log_v / t_max as f64)
}

/// Withdrawal fractions and average withdrawal under the earnings-linked rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarningsLinkedStats {
    /// `W(t) = 1 - exp(w - G(t))`.
    pub w_series: Vec<f64>,
    /// Sample mean of `exp(-G)`.
    pub mean_exp_neg_g: f64,
    /// `M(w) = 1 - exp(w) mean(exp(-G))`.
    pub mean_withdrawal: f64,
}

pub fn earnings_linked_stats(w: f64, g_hist: &[f64]) -> Result<EarningsLinkedStats> {
    if g_hist.is_empty() {
        return Err(Error::TooFewObservations { needed: 0, got: 0 });
    }
    let w_series: Vec<f64> = g_hist.iter().map(|g| -(w - g).exp_m1()).collect();
    let mean_exp_neg_g = g_hist.iter().map(|g| (-g).exp()).sum::<f64>() / g_hist.len() as f64;
    Ok(EarningsLinkedStats { w_series, mean_exp_neg_g, mean_withdrawal: 1.0 - w.exp() * mean_exp_neg_g })
}
