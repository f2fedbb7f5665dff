//! Continuous-time factor model.
//!
//! The valuation factor follows `dH = f(H) dt + σ dW` (or `dH = f(H) dt + dL`
//! with a Lévy process `L`), log fundamentals follow `d ln F = g dt + ρ dZ`
//! with `Z` independent of `W`, and wealth is `V(t) = exp(c t + ln F(t) + H(t))`.
//! Portfolio and consumption rules are integrated with Euler steps; the
//! value-function factor `θ` of the CRRA problem is solved by finite
//! differences.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{sim_rng, stream_rng};

/// Largest number of Euler steps accepted for one path.
pub const MAX_STEPS: f64 = 1e8;

/// Drift `f(h)` of the valuation factor.
#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    /// `f(h) = -beta_rev (h - h_inf)`.
    LinearOu { beta_rev: f64, h_inf: f64 },
    /// User-supplied drift with a declared Lipschitz constant.
    #[serde(skip)]
    Custom { f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, lipschitz: f64 },
}

impl fmt::Debug for Drift {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::LinearOu { beta_rev, h_inf } => {
                fm.debug_struct("LinearOu").field("beta_rev", beta_rev).field("h_inf", h_inf).finish()
            }
            Drift::Custom { lipschitz, .. } => fm.debug_struct("Custom").field("lipschitz", lipschitz).finish(),
        }
    }
}

impl Drift {
    pub fn eval(&self, h: f64) -> f64 {
        match self {
            Drift::LinearOu { beta_rev, h_inf } => -beta_rev * (h - h_inf),
            Drift::Custom { f, .. } => f(h),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Drift::LinearOu { beta_rev, .. } => *beta_rev,
            Drift::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// Zero drift, useful for flat-input checks.
    pub fn zero() -> Self {
        Drift::Custom { f: Arc::new(|_| 0.0), lipschitz: 0.0 }
    }
}

/// Real risk-free rate, constant or a yearly step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskFree {
    Constant(f64),
    /// Rate for `t` in `[k, k+1)` is entry `k`; the last entry extends forever.
    Yearly(Vec<f64>),
}

impl RiskFree {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            RiskFree::Constant(r) => *r,
            RiskFree::Yearly(v) => v[(t.max(0.0) as usize).min(v.len() - 1)],
        }
    }
}

/// Parameters of the continuous-time model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CtModelSpec {
    pub drift: Drift,
    /// Factor volatility per √year.
    pub sigma: f64,
    /// Drift of log fundamentals per year.
    pub g: f64,
    /// Volatility of log fundamentals per √year.
    pub rho: f64,
    /// Implied dividend yield per year.
    pub c: f64,
    pub r: RiskFree,
}

impl CtModelSpec {
    /// Check volatilities, mean reversion and the risk-free schedule.
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !(self.rho >= 0.0) {
            return Err(Error::InvalidParameter("volatilities must be non-negative".into()));
        }
        if let Drift::LinearOu { beta_rev, .. } = self.drift {
            if !(beta_rev > 0.0) {
                return Err(Error::InvalidParameter("beta_rev must be positive".into()));
            }
        }
        if let RiskFree::Yearly(v) = &self.r {
            if v.is_empty() {
                return Err(Error::InvalidParameter("yearly risk-free schedule is empty".into()));
            }
        }
        Ok(())
    }

    /// Total instantaneous variance `σ² + ρ²` of log wealth.
    pub fn total_variance(&self) -> f64 {
        self.sigma * self.sigma + self.rho * self.rho
    }

    /// Stationary standard deviation `σ / √(2 beta_rev)` for the linear drift.
    pub fn stationary_sd(&self) -> Option<f64> {
        match self.drift {
            Drift::LinearOu { beta_rev, .. } => Some(self.sigma / (2.0 * beta_rev).sqrt()),
            Drift::Custom { .. } => None,
        }
    }
}

fn step_count(dt: f64, t_max: f64, lipschitz: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_max > 0.0) {
        return Err(Error::InvalidParameter("dt and T must be positive".into()));
    }
    let n = (t_max / dt).round();
    if n > MAX_STEPS {
        return Err(Error::InvalidParameter(format!("{n} steps exceed the limit")));
    }
    if dt * lipschitz > 0.5 {
        return Err(Error::StepTooLarge(dt * lipschitz));
    }
    Ok((n as usize).max(1))
}

fn euler_factor<R: Rng + ?Sized>(spec: &CtModelSpec, h0: f64, dt: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let sq = dt.sqrt();
    let mut h = Vec::with_capacity(n + 1);
    h.push(h0);
    let mut x = h0;
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(rng);
        x += spec.drift.eval(x) * dt + spec.sigma * sq * z;
        h.push(x);
    }
    h
}

/// Euler-Maruyama path of `dH = f(H) dt + σ dW` on `t = 0, dt, ..., T`.
pub fn simulate_factor(spec: &CtModelSpec, h0: f64, dt: f64, t_max: f64, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = step_count(dt, t_max, spec.drift.lipschitz())?;
    Ok(euler_factor(spec, h0, dt, n, &mut sim_rng(seed, 0)))
}

/// Path of log fundamentals `ln F(t) = ln F(0) + g t + ρ Z(t)`.
///
/// Uses its own random stream, independent of the factor noise for the same seed.
pub fn simulate_fundamental(spec: &CtModelSpec, f0: f64, dt: f64, t_max: f64, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = step_count(dt, t_max, 0.0)?;
    let mut rng = stream_rng(seed, 2);
    Ok(fundamental_path(spec, f0, dt, n, &mut rng))
}

fn fundamental_path<R: Rng + ?Sized>(spec: &CtModelSpec, f0: f64, dt: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let sq = dt.sqrt();
    let mut out = Vec::with_capacity(n + 1);
    out.push(f0);
    let mut x = f0;
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(rng);
        x += spec.g * dt + spec.rho * sq * z;
        out.push(x);
    }
    out
}

/// Jump-size law of one compound-Poisson component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpDist {
    Normal { mean: f64, sd: f64 },
    /// `up` with probability `p_up`, otherwise `down`.
    TwoPoint { up: f64, down: f64, p_up: f64 },
}

impl JumpDist {
    pub fn mean(&self) -> f64 {
        match *self {
            JumpDist::Normal { mean, .. } => mean,
            JumpDist::TwoPoint { up, down, p_up } => p_up * up + (1.0 - p_up) * down,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            JumpDist::Normal { mean, sd } => mean * mean + sd * sd,
            JumpDist::TwoPoint { up, down, p_up } => p_up * up * up + (1.0 - p_up) * down * down,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpDist::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            JumpDist::TwoPoint { up, down, p_up } => {
                if rng.random::<f64>() < p_up {
                    up
                } else {
                    down
                }
            }
        }
    }
}

/// One compound-Poisson component of the jump measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpComponent {
    /// Jumps per year.
    pub rate: f64,
    pub dist: JumpDist,
}

/// Lévy triple with a finite jump measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevySpec {
    pub b: f64,
    pub sigma: f64,
    pub jumps: Vec<JumpComponent>,
    pub zero_mean_enforced: bool,
}

impl LevySpec {
    /// Build a spec; when `zero_mean` is set, `b` is replaced by `-Σ rate E[J]`.
    pub fn new(b: f64, sigma: f64, jumps: Vec<JumpComponent>, zero_mean: bool) -> Self {
        let mut s = Self { b, sigma, jumps, zero_mean_enforced: zero_mean };
        if zero_mean {
            s.b = -s.jump_mean_rate();
        }
        s
    }

    /// `Σ rate E[J]`.
    pub fn jump_mean_rate(&self) -> f64 {
        self.jumps.iter().map(|j| j.rate * j.dist.mean()).sum()
    }

    /// Mean of `L(1)`: `b + Σ rate E[J]`.
    pub fn mean_rate(&self) -> f64 {
        self.b + self.jump_mean_rate()
    }

    /// Variance of `L(1)`: `σ² + Σ rate E[J²]`.
    pub fn variance_rate(&self) -> f64 {
        self.sigma * self.sigma + self.jumps.iter().map(|j| j.rate * j.dist.second_moment()).sum::<f64>()
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || self.jumps.iter().any(|j| !(j.rate >= 0.0)) {
            return Err(Error::InvalidParameter("Lévy volatility and jump rates must be non-negative".into()));
        }
        if self.zero_mean_enforced && self.mean_rate().abs() > 1e-12 {
            return Err(Error::InvalidParameter("zero-mean condition b + Σ rate E[J] = 0 violated".into()));
        }
        Ok(())
    }
}

fn euler_levy<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    spec: &CtModelSpec,
    levy: &LevySpec,
    h0: f64,
    dt: f64,
    n: usize,
    rng_w: &mut R1,
    rng_j: &mut R2,
) -> Vec<f64> {
    let sq = dt.sqrt();
    let clocks: Vec<Option<Exp<f64>>> =
        levy.jumps.iter().map(|j| if j.rate > 0.0 { Exp::new(j.rate).ok() } else { None }).collect();
    let mut next: Vec<f64> =
        clocks.iter().map(|c| c.as_ref().map_or(f64::INFINITY, |e| e.sample(rng_j))).collect();
    let mut out = Vec::with_capacity(n + 1);
    out.push(h0);
    let mut x = h0;
    for k in 0..n {
        let z: f64 = StandardNormal.sample(rng_w);
        let mut inc = spec.drift.eval(x) * dt + levy.sigma * sq * z;
        if levy.b != 0.0 {
            inc += levy.b * dt;
        }
        let t_end = (k + 1) as f64 * dt;
        for (ci, clock) in clocks.iter().enumerate() {
            if let Some(e) = clock {
                while next[ci] <= t_end {
                    inc += levy.jumps[ci].dist.sample(rng_j);
                    next[ci] += e.sample(rng_j);
                }
            }
        }
        x += inc;
        out.push(x);
    }
    out
}

/// Euler path of `dH = f(H) dt + dL` with `L` given by `levy`.
///
/// The Gaussian part uses the same stream as [`simulate_factor`]; jump
/// clocks and sizes use a separate stream, so a jump-free spec with the same
/// volatility reproduces [`simulate_factor`] exactly.
pub fn simulate_levy_factor(
    spec: &CtModelSpec,
    levy: &LevySpec,
    h0: f64,
    dt: f64,
    t_max: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate()?;
    levy.validate()?;
    let n = step_count(dt, t_max, spec.drift.lipschitz())?;
    Ok(euler_levy(spec, levy, h0, dt, n, &mut sim_rng(seed, 0), &mut stream_rng(seed, 1)))
}

/// Wealth `V(t) = exp(c t + ln F(t) + H(t))` on the grid `t = k dt`.
pub fn wealth_from_factor(h: &[f64], ln_f: &[f64], c: f64, dt: f64) -> Result<Vec<f64>> {
    if h.len() != ln_f.len() {
        return Err(Error::LengthMismatch { left: h.len(), right: ln_f.len() });
    }
    Ok(h.iter().zip(ln_f).enumerate().map(|(k, (hk, fk))| (c * k as f64 * dt + fk + hk).exp()).collect())
}

/// Stock-share rule `π(t, h)`.
pub type PiRule<'a> = &'a (dyn Fn(f64, f64) -> f64 + Sync);
/// Consumption rate rule `C(t, v, h)` in wealth units per year.
pub type ConsumptionRule<'a> = &'a (dyn Fn(f64, f64, f64) -> f64 + Sync);

/// Wealth path of a portfolio rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioPath {
    pub v: Vec<f64>,
    pub pi: Vec<f64>,
    /// Step at which wealth became non-positive, ending the path.
    pub terminated_at: Option<usize>,
}

/// Euler integration of `dV/V = π dX + (1-π) r dt - (C/V) dt`, where
/// `dX = dH + c dt + d ln F + (σ² + ρ²)/2 dt` is the stock return.
///
/// `pi_bound` is the declared bound on `|π|`; larger shares are rejected.
#[allow(clippy::too_many_arguments)]
pub fn integrate_portfolio(
    h: &[f64],
    ln_f: &[f64],
    spec: &CtModelSpec,
    dt: f64,
    pi_rule: PiRule<'_>,
    consumption: Option<ConsumptionRule<'_>>,
    v0: f64,
    pi_bound: f64,
) -> Result<PortfolioPath> {
    if h.len() != ln_f.len() {
        return Err(Error::LengthMismatch { left: h.len(), right: ln_f.len() });
    }
    let half_var = 0.5 * spec.total_variance();
    let mut v = Vec::with_capacity(h.len());
    let mut pis = Vec::with_capacity(h.len());
    v.push(v0);
    let mut x = v0;
    for k in 0..h.len() - 1 {
        let t = k as f64 * dt;
        let pi = pi_rule(t, h[k]);
        if !(pi.abs() <= pi_bound) {
            return Err(Error::InvalidParameter(format!("portfolio share {pi} exceeds bound {pi_bound}")));
        }
        pis.push(pi);
        let dx = (h[k + 1] - h[k]) + spec.c * dt + (ln_f[k + 1] - ln_f[k]) + half_var * dt;
        let cons = consumption.map_or(0.0, |c| c(t, x, h[k]));
        x += x * (pi * dx + (1.0 - pi) * spec.r.at(t) * dt) - cons * dt;
        v.push(x);
        if x <= 0.0 {
            return Ok(PortfolioPath { v, pi: pis, terminated_at: Some(k + 1) });
        }
    }
    Ok(PortfolioPath { v, pi: pis, terminated_at: None })
}

/// Optimal stock share `1/(2γ) + (g + c + f(h) - r) / (γ(σ² + ρ²))` at time 0.
pub fn optimal_pi(h: f64, spec: &CtModelSpec, gamma: f64) -> f64 {
    optimal_pi_at(0.0, h, spec, gamma)
}

/// [`optimal_pi`] with the risk-free rate in force at time `t`.
pub fn optimal_pi_at(t: f64, h: f64, spec: &CtModelSpec, gamma: f64) -> f64 {
    1.0 / (2.0 * gamma) + (spec.g + spec.c + spec.drift.eval(h) - spec.r.at(t)) / (gamma * spec.total_variance())
}

/// Form of the bracket `κ(t, h)` multiplying `(1-γ)θ` in the value-function equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HjbBracket {
    /// `r - π*² / (2γ(σ² + ρ²))`, the published form.
    #[default]
    Printed,
    /// `r + γ(σ² + ρ²) π*² / 2`, the maximum of the portfolio drift term
    /// `π(σ²+ρ²)/2 - γ(σ²+ρ²)π²/2 + π(g+c+f) + (1-π)r`.
    Supremum,
}

/// Printed bracket `κ(t, h) = r - π*(h)² / (2γ(σ² + ρ²))`.
pub fn hjb_bracket(t: f64, h: f64, spec: &CtModelSpec, gamma: f64) -> f64 {
    hjb_bracket_with(t, h, spec, gamma, HjbBracket::Printed)
}

pub fn hjb_bracket_with(t: f64, h: f64, spec: &CtModelSpec, gamma: f64, form: HjbBracket) -> f64 {
    let pi = optimal_pi_at(t, h, spec, gamma);
    let var = spec.total_variance();
    match form {
        HjbBracket::Printed => spec.r.at(t) - pi * pi / (2.0 * gamma * var),
        HjbBracket::Supremum => spec.r.at(t) + 0.5 * gamma * var * pi * pi,
    }
}

/// Spatial (and, for the terminal problem, temporal) grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaGrid {
    pub h_min: f64,
    pub h_max: f64,
    pub n_h: usize,
    /// Horizon of the terminal problem (ignored by the ODE).
    pub horizon: f64,
    /// Number of time steps of the terminal problem (ignored by the ODE).
    pub n_t: usize,
}

impl ThetaGrid {
    /// Grid of ±`half_width_sd` stationary standard deviations around `h_inf`.
    pub fn around_stationary(spec: &CtModelSpec, half_width_sd: f64, n_h: usize, horizon: f64, n_t: usize) -> Result<Self> {
        let (sd, centre) = match spec.drift {
            Drift::LinearOu { h_inf, .. } => (spec.stationary_sd().unwrap_or(0.0), h_inf),
            Drift::Custom { .. } => {
                return Err(Error::InvalidParameter("stationary grid needs a linear drift".into()));
            }
        };
        let hw = (half_width_sd * sd).max(1e-3);
        Ok(Self { h_min: centre - hw, h_max: centre + hw, n_h, horizon, n_t })
    }

    pub fn h_values(&self) -> Vec<f64> {
        let dh = self.dh();
        (0..self.n_h).map(|i| self.h_min + i as f64 * dh).collect()
    }

    pub fn dh(&self) -> f64 {
        (self.h_max - self.h_min) / (self.n_h - 1) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n_h < 3 || !(self.h_max > self.h_min) {
            return Err(Error::GridUnstable("need at least 3 points on a non-empty interval".into()));
        }
        Ok(())
    }
}

/// Which problem a [`ThetaSolution`] solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaKind {
    TerminalPde,
    ConsumptionOde,
}

/// Numerical value-function factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSolution {
    pub kind: ThetaKind,
    pub grid: ThetaGrid,
    pub h: Vec<f64>,
    /// Time points of the terminal problem; a single `0` for the ODE.
    pub t: Vec<f64>,
    /// `values[k][i] = θ(t[k], h[i])`.
    pub values: Vec<Vec<f64>>,
    pub gamma: f64,
    pub discount_rate: Option<f64>,
    /// Largest absolute residual of the discrete equation on interior nodes.
    pub residual_norm: f64,
}

impl ThetaSolution {
    /// `θ` at the first time point, linearly interpolated in `h` and clamped to the grid.
    pub fn theta_at(&self, h: f64) -> f64 {
        interp(&self.h, &self.values[0], h)
    }

    /// Consumption rate `C = v θ(h)^{-1/γ}`.
    pub fn consumption(&self, v: f64, h: f64) -> f64 {
        v * self.theta_at(h).powf(-1.0 / self.gamma)
    }

    /// CSV dump: `h,theta` for the ODE, `t,h,theta` for the terminal problem.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.kind {
            ThetaKind::ConsumptionOde => {
                out.push_str("h,theta\n");
                for (h, th) in self.h.iter().zip(&self.values[0]) {
                    out.push_str(&format!("{h},{th}\n"));
                }
            }
            ThetaKind::TerminalPde => {
                out.push_str("t,h,theta\n");
                for (t, row) in self.t.iter().zip(&self.values) {
                    for (h, th) in self.h.iter().zip(row) {
                        out.push_str(&format!("{t},{h},{th}\n"));
                    }
                }
            }
        }
        out
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let dx = xs[1] - xs[0];
    let i = (((x - xs[0]) / dx) as usize).min(n - 2);
    let w = (x - xs[i]) / dx;
    ys[i] * (1.0 - w) + ys[i + 1] * w
}

/// Tridiagonal operator `(lower, diag, upper)` of
/// `f θ' + σ²/2 θ'' + q θ` with central differences inside and
/// `θ'' = 0`, one-sided first derivatives at the two edges.
fn operator(h: &[f64], dh: f64, spec: &CtModelSpec, q: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = h.len();
    let d2 = 0.5 * spec.sigma * spec.sigma / (dh * dh);
    let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        let f = spec.drift.eval(h[i]);
        if i == 0 {
            di[i] = -f / dh + q[i];
            up[i] = f / dh;
        } else if i == n - 1 {
            lo[i] = -f / dh;
            di[i] = f / dh + q[i];
        } else {
            lo[i] = -f / (2.0 * dh) + d2;
            di[i] = -2.0 * d2 + q[i];
            up[i] = f / (2.0 * dh) + d2;
        }
    }
    (lo, di, up)
}

fn apply(lo: &[f64], di: &[f64], up: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut s = di[i] * x[i];
            if i > 0 {
                s += lo[i] * x[i - 1];
            }
            if i + 1 < n {
                s += up[i] * x[i + 1];
            }
            s
        })
        .collect()
}

/// Thomas algorithm for a tridiagonal system.
fn solve_tridiagonal(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = di.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = di[0];
    if denom.abs() < 1e-300 {
        return Err(Error::GridUnstable("singular tridiagonal system".into()));
    }
    c[0] = up[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = di[i] - lo[i] * c[i - 1];
        if denom.abs() < 1e-300 {
            return Err(Error::GridUnstable("singular tridiagonal system".into()));
        }
        c[i] = up[i] / denom;
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

/// Solve `θ_t + f θ_h + σ²/2 θ_hh + (1-γ) κ(t,h) θ = 0`, `θ(T, h) = 1`,
/// backwards in time with Crank-Nicolson.
///
/// `values[k]` holds `θ` at `t[k] = k T / n_t`. For `γ = 1` the source term
/// vanishes and `θ ≡ 1` is returned directly.
pub fn solve_terminal_pde(spec: &CtModelSpec, gamma: f64, grid: &ThetaGrid) -> Result<ThetaSolution> {
    solve_terminal_pde_with(spec, gamma, grid, HjbBracket::Printed)
}

/// [`solve_terminal_pde`] with a chosen bracket.
pub fn solve_terminal_pde_with(spec: &CtModelSpec, gamma: f64, grid: &ThetaGrid, form: HjbBracket) -> Result<ThetaSolution> {
    spec.validate()?;
    grid.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }
    if grid.n_t == 0 || !(grid.horizon > 0.0) {
        return Err(Error::GridUnstable("need a positive horizon and at least one time step".into()));
    }
    let h = grid.h_values();
    let n_t = grid.n_t;
    let dt = grid.horizon / n_t as f64;
    let t: Vec<f64> = (0..=n_t).map(|k| k as f64 * dt).collect();
    if gamma == 1.0 {
        return Ok(ThetaSolution {
            kind: ThetaKind::TerminalPde,
            grid: *grid,
            h: h.clone(),
            t,
            values: vec![vec![1.0; h.len()]; n_t + 1],
            gamma,
            discount_rate: None,
            residual_norm: 0.0,
        });
    }
    let dh = grid.dh();
    let n = h.len();
    let mut values = vec![vec![0.0; n]; n_t + 1];
    values[n_t] = vec![1.0; n];
    let mut residual: f64 = 0.0;
    for k in (0..n_t).rev() {
        // Coefficients at the midpoint of the step.
        let tm = t[k] + 0.5 * dt;
        let q: Vec<f64> = h.iter().map(|&hi| (1.0 - gamma) * hjb_bracket_with(tm, hi, spec, gamma, form)).collect();
        let (lo, di, up) = operator(&h, dh, spec, &q);
        let next = &values[k + 1];
        let l_next = apply(&lo, &di, &up, next);
        let rhs: Vec<f64> = next.iter().zip(&l_next).map(|(x, l)| x + 0.5 * dt * l).collect();
        let a_lo: Vec<f64> = lo.iter().map(|x| -0.5 * dt * x).collect();
        let a_di: Vec<f64> = di.iter().map(|x| 1.0 - 0.5 * dt * x).collect();
        let a_up: Vec<f64> = up.iter().map(|x| -0.5 * dt * x).collect();
        let cur = solve_tridiagonal(&a_lo, &a_di, &a_up, &rhs)?;
        if let Some(i) = cur.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::NonPositiveTheta(i));
        }
        let l_cur = apply(&lo, &di, &up, &cur);
        for i in 1..n - 1 {
            let r = (next[i] - cur[i]) / dt + 0.5 * (l_next[i] + l_cur[i]);
            residual = residual.max(r.abs());
        }
        values[k] = cur;
    }
    Ok(ThetaSolution {
        kind: ThetaKind::TerminalPde,
        grid: *grid,
        h,
        t,
        values,
        gamma,
        discount_rate: None,
        residual_norm: residual,
    })
}

/// Constant solution `θ = (γ / (δ - (1-γ) κ))^γ` of the consumption equation
/// with all coefficients frozen.
pub fn constant_consumption_theta(gamma: f64, discount_rate: f64, kappa: f64) -> Result<f64> {
    let denom = discount_rate - (1.0 - gamma) * kappa;
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter("discount rate too small for a positive solution".into()));
    }
    Ok((gamma / denom).powf(gamma))
}

/// Newton iteration settings for [`solve_consumption_ode`].
pub const ODE_TOL: f64 = 1e-11;
pub const ODE_MAX_ITER: usize = 200;

/// Solve `0 = -δθ + fθ' + σ²/2 θ'' + (1-γ) κ(h) θ + γ θ^{1-1/γ}` on the grid.
///
/// Damped Newton iteration from the constant solution at the grid centre.
pub fn solve_consumption_ode(spec: &CtModelSpec, gamma: f64, discount_rate: f64, grid: &ThetaGrid) -> Result<ThetaSolution> {
    solve_consumption_ode_with(spec, gamma, discount_rate, grid, HjbBracket::Printed)
}

/// [`solve_consumption_ode`] with a chosen bracket.
pub fn solve_consumption_ode_with(
    spec: &CtModelSpec,
    gamma: f64,
    discount_rate: f64,
    grid: &ThetaGrid,
    form: HjbBracket,
) -> Result<ThetaSolution> {
    spec.validate()?;
    grid.validate()?;
    if !(gamma > 0.0) || !(discount_rate > 0.0) {
        return Err(Error::InvalidParameter("gamma and discount rate must be positive".into()));
    }
    let h = grid.h_values();
    let n = h.len();
    let dh = grid.dh();
    let q: Vec<f64> = h.iter().map(|&hi| (1.0 - gamma) * hjb_bracket_with(0.0, hi, spec, gamma, form) - discount_rate).collect();
    let (lo, di, up) = operator(&h, dh, spec, &q);
    let centre = 0.5 * (grid.h_min + grid.h_max);
    let theta0 = constant_consumption_theta(gamma, discount_rate, hjb_bracket_with(0.0, centre, spec, gamma, form))?;
    let expo = 1.0 - 1.0 / gamma;
    let resid = |th: &[f64]| -> Vec<f64> {
        apply(&lo, &di, &up, th).iter().zip(th).map(|(l, x)| l + gamma * x.powf(expo)).collect()
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut theta = vec![theta0; n];
    let mut r = resid(&theta);
    let mut iterations = 0;
    while norm(&r) > ODE_TOL * theta0.max(1.0) {
        if iterations == ODE_MAX_ITER {
            return Err(Error::NoConvergence { iterations, residual: norm(&r) });
        }
        iterations += 1;
        let jd: Vec<f64> = di
            .iter()
            .zip(&theta)
            .map(|(d, x)| d + gamma * expo * x.powf(expo - 1.0))
            .collect();
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solve_tridiagonal(&lo, &jd, &up, &neg_r)?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(x, s)| x + lambda * s).collect();
            if trial.iter().all(|v| *v > 0.0) {
                let rt = resid(&trial);
                if norm(&rt) < norm(&r) || lambda < 1e-6 {
                    theta = trial;
                    r = rt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::NoConvergence { iterations, residual: norm(&r) });
            }
        }
    }
    if let Some(i) = theta.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveTheta(i));
    }
    let residual_norm = norm(&r[1..n - 1]);
    Ok(ThetaSolution {
        kind: ThetaKind::ConsumptionOde,
        grid: *grid,
        h,
        t: vec![0.0],
        values: vec![theta],
        gamma,
        discount_rate: Some(discount_rate),
        residual_norm,
    })
}

/// Noise driving the factor in ergodicity checks.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorNoise {
    Brownian,
    Levy(LevySpec),
}

/// Outcome of a two-start ergodicity experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    /// Mean of `|H(t_max)| / t_max` over all paths.
    pub mean_abs_h_over_t: f64,
    /// Two-sample Kolmogorov-Smirnov distance between terminal values.
    pub ks_distance: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub n_paths: usize,
}

/// Terminal values of `n_paths` factor paths from `h0`, path `i` seeded with `seed + i`.
pub fn terminal_values(
    spec: &CtModelSpec,
    noise: &FactorNoise,
    h0: f64,
    dt: f64,
    t_max: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if let FactorNoise::Levy(l) = noise {
        l.validate()?;
    }
    let n = step_count(dt, t_max, spec.drift.lipschitz())?;
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i);
            let path = match noise {
                FactorNoise::Brownian => euler_factor(spec, h0, dt, n, &mut sim_rng(s, 0)),
                FactorNoise::Levy(l) => euler_levy(spec, l, h0, dt, n, &mut sim_rng(s, 0), &mut stream_rng(s, 1)),
            };
            path[n]
        })
        .collect())
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Run factor paths from two starting points with independent noise and
/// compare their terminal laws.
#[allow(clippy::too_many_arguments)]
pub fn ergodicity_check_ct(
    spec: &CtModelSpec,
    noise: &FactorNoise,
    h0_a: f64,
    h0_b: f64,
    t_max: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<ErgodicityReport> {
    if n_paths < 2 {
        return Err(Error::InvalidParameter("need at least two paths".into()));
    }
    let a = terminal_values(spec, noise, h0_a, dt, t_max, n_paths, seed)?;
    let b = terminal_values(spec, noise, h0_b, dt, t_max, n_paths, seed.wrapping_add(n_paths as u64))?;
    let moments = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0);
        (m, v)
    };
    let (mean_a, var_a) = moments(&a);
    let (mean_b, var_b) = moments(&b);
    let mean_abs_h_over_t = a.iter().chain(&b).map(|v| v.abs()).sum::<f64>() / (2 * n_paths) as f64 / t_max;
    Ok(ErgodicityReport { mean_abs_h_over_t, ks_distance: ks_two_sample(&a, &b), mean_a, mean_b, var_a, var_b, n_paths })
}

/// One simulated path for export: factor, log fundamentals, wealth and share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtPath {
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub ln_f: Vec<f64>,
    pub v: Vec<f64>,
    pub pi: Vec<f64>,
}

impl CtPath {
    /// CSV with header `t,H,F,V,pi`; `F` is the log fundamental.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,H,F,V,pi\n");
        for k in 0..self.t.len() {
            out.push_str(&format!("{},{},{},{},{}\n", self.t[k], self.h[k], self.ln_f[k], self.v[k], self.pi[k]));
        }
        out
    }
}

/// Simulate factor and fundamentals, then the wealth of the optimal rule for `gamma`.
pub fn simulate_optimal_path(spec: &CtModelSpec, gamma: f64, h0: f64, dt: f64, t_max: f64, seed: u64) -> Result<CtPath> {
    let h = simulate_factor(spec, h0, dt, t_max, seed)?;
    let ln_f = simulate_fundamental(spec, 0.0, dt, t_max, seed)?;
    let rule = |t: f64, x: f64| optimal_pi_at(t, x, spec, gamma);
    let port = integrate_portfolio(&h, &ln_f, spec, dt, &rule, None, 1.0, f64::INFINITY)?;
    let len = port.v.len();
    let mut pi: Vec<f64> = h[..len].iter().enumerate().map(|(k, x)| rule(k as f64 * dt, *x)).collect();
    pi.truncate(len);
    Ok(CtPath {
        t: (0..len).map(|k| k as f64 * dt).collect(),
        h: h[..len].to_vec(),
        ln_f: ln_f[..len].to_vec(),
        v: port.v,
        pi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ou(beta_rev: f64, sigma: f64) -> CtModelSpec {
        CtModelSpec {
            drift: Drift::LinearOu { beta_rev, h_inf: -0.2 },
            sigma,
            g: 0.018,
            rho: 0.037,
            c: 0.047,
            r: RiskFree::Constant(0.01),
        }
    }

    #[test]
    fn deterministic_relaxation() {
        let spec = ou(0.5, 0.0);
        let p = simulate_factor(&spec, -0.2, 0.01, 5.0, 1).unwrap();
        assert!(p.iter().all(|x| (*x + 0.2).abs() < 1e-15));
        let p = simulate_factor(&spec, 0.8, 0.001, 4.0, 1).unwrap();
        let exact = -0.2 + (-0.5f64 * 4.0).exp();
        assert_abs_diff_eq!(*p.last().unwrap(), exact, epsilon = 1e-3);
    }

    #[test]
    fn step_too_large_rejected() {
        let spec = ou(10.0, 0.1);
        assert!(matches!(simulate_factor(&spec, 0.0, 0.1, 1.0, 0), Err(Error::StepTooLarge(_))));
    }

    #[test]
    fn tridiagonal_solver_roundtrip() {
        let lo = [0.0, 1.0, 2.0, 1.0];
        let di = [4.0, 5.0, 6.0, 5.0];
        let up = [1.0, 1.0, 1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let rhs = apply(&lo, &di, &up, &x);
        let y = solve_tridiagonal(&lo, &di, &up, &rhs).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&a, &[10.0, 11.0]), 1.0);
    }
}
