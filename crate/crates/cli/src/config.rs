//! JSON overrides for every command.

use std::path::PathBuf;

use serde::Deserialize;
use valuation_lab::continuous::HjbBracket;
use valuation_lab::ruin::PiMode;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Trailing-average window in years.
    pub window: usize,
    /// Nominal rate CSV (`year,nominal_rate`); bundled January GS10 when absent.
    pub rates: Option<PathBuf>,
    pub ruin: RuinSettings,
    pub portfolio: PortfolioSettings,
    pub ctsim: CtSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            window: 10,
            rates: None,
            ruin: RuinSettings::default(),
            portfolio: PortfolioSettings::default(),
            ctsim: CtSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuinSettings {
    pub rates: Vec<f64>,
    pub horizons: Vec<usize>,
    pub n_sims: usize,
}

impl Default for RuinSettings {
    fn default() -> Self {
        // 2% to 16% in steps of 0.2%.
        let rates = (0..=70).map(|i| (20 + 2 * i) as f64 / 1000.0).collect();
        Self { rates, horizons: vec![10, 20, 30, 40, 50], n_sims: 1000 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortfolioSettings {
    pub gamma_grid: Vec<f64>,
    pub withdrawal_rate: f64,
    pub horizons: Vec<usize>,
    pub n_sims: usize,
    pub mode: PiMode,
    pub clamp: Option<(f64, f64)>,
}

impl Default for PortfolioSettings {
    fn default() -> Self {
        Self {
            gamma_grid: (1..=12).map(|i| i as f64 * 0.5).collect(),
            withdrawal_rate: 0.05,
            horizons: vec![30, 50],
            n_sims: 1000,
            mode: PiMode::Printed,
            clamp: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtSettings {
    pub gamma: f64,
    pub dt: f64,
    pub horizon: f64,
    pub discount_rate: f64,
    pub n_h: usize,
    pub n_t: usize,
    pub half_width_sd: f64,
    pub bracket: HjbBracket,
}

impl Default for CtSettings {
    fn default() -> Self {
        Self { gamma: 3.0, dt: 0.01, horizon: 50.0, discount_rate: 0.1, n_h: 241, n_t: 500, half_width_sd: 6.0, bracket: HjbBracket::Supremum }
    }
}

impl Config {
    /// Parse inline JSON (starting with `{`) or the JSON file at the given path.
    pub fn load(arg: Option<&str>) -> Result<Self, CliError> {
        let Some(arg) = arg else { return Ok(Self::default()) };
        let text = if arg.trim_start().starts_with('{') {
            arg.to_string()
        } else {
            std::fs::read_to_string(arg).map_err(|e| CliError::input("ConfigUnreadable", format!("{arg}: {e}")))?
        };
        let cfg: Config = serde_json::from_str(&text).map_err(|e| CliError::input("InvalidConfig", e.to_string()))?;
        if cfg.window == 0 {
            return Err(CliError::input("InvalidConfig", "window must be positive"));
        }
        Ok(cfg)
    }
}
