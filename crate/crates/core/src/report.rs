//! End-to-end analysis of a market table and comparison with reference values.

use serde::{Deserialize, Serialize};

use crate::discrete::{earnings_linked_stats, DiscreteModelSpec};
use crate::error::Result;
use crate::market_data::{build_derived, DerivedSeries, RawMarketTable};
use crate::stats::descriptive::{mean, pearson, std_dev};
use crate::stats::hypothesis::TestName;
use crate::valuation::{fit_bubble, fit_tr_cape, predictive_correlation, Ar1Fit, BubbleFit, Diagnostic};

/// Derived series together with both fitted models.
#[derive(Debug, Clone)]
pub struct HistoricalAnalysis {
    pub derived: DerivedSeries,
    pub tr_cape: Ar1Fit,
    pub bubble: BubbleFit,
}

impl HistoricalAnalysis {
    pub fn new(raw: &RawMarketTable, window: usize) -> Result<Self> {
        let derived = build_derived(raw, window)?;
        let tr_cape = fit_tr_cape(&derived.ln_tr_cape(), Some(&derived.tr_growth()))?;
        let bubble = fit_bubble(&derived.ln_modified_ratio(), &derived.t_index())?;
        Ok(Self { derived, tr_cape, bubble })
    }

    /// Bubble measure `B(t)` on the full index range (NaN before the base index).
    pub fn bubble_full(&self) -> Vec<f64> {
        let mut out = vec![f64::NAN; self.derived.base_index];
        out.extend_from_slice(&self.bubble.b_series);
        out
    }

    /// Current value `B(T)`.
    pub fn bubble_now(&self) -> f64 {
        *self.bubble.b_series.last().expect("non-empty")
    }

    fn log_full(x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.ln()).collect()
    }

    /// Predictive correlations `(measure, horizon, value)` for ln TR-CAPE, ln CAPE and `B`.
    pub fn predictive_table(&self, horizons: &[usize]) -> Result<Vec<(String, usize, f64)>> {
        let d = &self.derived;
        let measures = [
            ("ln_tr_cape", Self::log_full(&d.tr_cape)),
            ("ln_cape", Self::log_full(&d.cape)),
            ("bubble", self.bubble_full()),
        ];
        let mut out = Vec::new();
        for (name, m) in &measures {
            for &hz in horizons {
                out.push((name.to_string(), hz, predictive_correlation(m, &d.r, hz)?));
            }
        }
        Ok(out)
    }

    /// `corr(ln F, ln G)` over the valuation window.
    pub fn cape_tr_cape_correlation(&self) -> f64 {
        pearson(&self.derived.ln_cape(), &self.derived.ln_tr_cape())
    }

    /// Discrete model spec for the bubble measure, with historical growth blocks.
    pub fn bubble_spec(&self) -> DiscreteModelSpec {
        DiscreteModelSpec {
            alpha: self.bubble.alpha_h,
            beta: self.bubble.beta_h,
            c: self.bubble.c,
            sigma_eps: self.bubble.sigma_eps,
            noise: Default::default(),
            g_source: crate::discrete::GSource::HistoricalBlocks(self.derived.real_growth()),
        }
    }

    /// Every diagnostic from both fits, labelled by model.
    pub fn diagnostics(&self) -> Vec<(String, Diagnostic)> {
        let mut out: Vec<(String, Diagnostic)> =
            self.tr_cape.diagnostics.iter().map(|d| ("tr_cape".to_string(), d.clone())).collect();
        out.extend(self.bubble.diagnostics.iter().map(|d| ("bubble".to_string(), d.clone())));
        out
    }
}

/// One comparison between a computed value and its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl GoldenCheck {
    pub fn new(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), value, reference, tolerance, pass: (value - reference).abs() <= tolerance }
    }

    /// Passes when `value <= bound`; `reference` records the bound.
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.to_string(), value, reference: bound, tolerance: 0.0, pass: value <= bound }
    }

    /// Passes when `value >= bound`.
    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.to_string(), value, reference: bound, tolerance: 0.0, pass: value >= bound }
    }
}

fn find_p(diags: &[Diagnostic], target: &str, name: TestName, lags: Option<usize>) -> f64 {
    diags
        .iter()
        .find(|d| {
            d.target == target
                && d.report.name == name
                && lags.is_none_or(|l| d.report.params.get("lags") == Some(&(l as f64)))
        })
        .map_or(f64::NAN, |d| d.report.p_value)
}

/// Reference values from the historical study, compared with this analysis.
pub fn golden_checks(a: &HistoricalAnalysis) -> Result<Vec<GoldenCheck>> {
    let d = &a.derived;
    let tr = &a.tr_cape;
    let bb = &a.bubble;
    let mut out = vec![
        GoldenCheck::new("tr_cape.alpha", tr.alpha, 0.34452, 0.005),
        GoldenCheck::new("tr_cape.beta", tr.beta, 0.88321, 0.005),
        GoldenCheck::new("tr_cape.sigma_eps", tr.sigma_eps, 0.16907, 0.005),
        GoldenCheck::new("bubble.raw_intercept", bb.raw_coeffs[0], 0.0220, 0.002),
        GoldenCheck::new("bubble.raw_slope", bb.raw_coeffs[1], -0.1315, 0.002),
        GoldenCheck::new("bubble.raw_trend", bb.raw_coeffs[2], 0.0061, 0.002),
        GoldenCheck::new("bubble.c", bb.c, 0.04668, 0.003),
        GoldenCheck::new("bubble.beta_h", bb.beta_h, 0.8685, 0.005),
        GoldenCheck::new("bubble.h", bb.h, -0.1875, 0.01),
        GoldenCheck::new("bubble.b_now", a.bubble_now(), -0.3434, 0.01),
    ];
    for (lag, p) in [5usize, 10, 15, 20].into_iter().zip([0.16, 0.15, 0.29, 0.24]) {
        out.push(GoldenCheck::new(
            &format!("tr_cape.ljung_box_{lag}"),
            find_p(&tr.diagnostics, "residuals", TestName::LjungBox, Some(lag)),
            p,
            0.03,
        ));
    }
    for (lag, p) in [5usize, 10, 15, 20].into_iter().zip([0.16, 0.14, 0.17, 0.03]) {
        out.push(GoldenCheck::new(
            &format!("bubble.ljung_box_{lag}"),
            find_p(&bb.diagnostics, "residuals", TestName::LjungBox, Some(lag)),
            p,
            0.03,
        ));
    }
    out.extend([
        GoldenCheck::new("tr_cape.shapiro_wilk", find_p(&tr.diagnostics, "residuals", TestName::ShapiroWilk, None), 0.045, 0.02),
        GoldenCheck::new("tr_cape.jarque_bera", find_p(&tr.diagnostics, "residuals", TestName::JarqueBera, None), 0.031, 0.02),
        GoldenCheck::new("bubble.shapiro_wilk", find_p(&bb.diagnostics, "residuals", TestName::ShapiroWilk, None), 0.06, 0.02),
        GoldenCheck::new("bubble.jarque_bera", find_p(&bb.diagnostics, "residuals", TestName::JarqueBera, None), 0.06, 0.02),
        GoldenCheck::new("tr_cape.adf", find_p(&tr.diagnostics, "series", TestName::Adf, None), 0.073, 0.03),
        GoldenCheck::at_most("bubble.slope_t_test", bb.slope_test(1.0).p_value, 0.01),
    ]);
    let table = a.predictive_table(&[1, 10])?;
    let get = |m: &str, h: usize| table.iter().find(|(n, hz, _)| n == m && *hz == h).map_or(f64::NAN, |x| x.2);
    out.extend([
        GoldenCheck::new("predict.ln_tr_cape_10y", get("ln_tr_cape", 10), -0.541, 0.02),
        GoldenCheck::new("predict.ln_cape_10y", get("ln_cape", 10), -0.538, 0.02),
        GoldenCheck::new("predict.bubble_10y", get("bubble", 10), -0.49, 0.02),
        GoldenCheck::new("predict.ln_tr_cape_1y", get("ln_tr_cape", 1), -0.178, 0.02),
        GoldenCheck::new("predict.ln_cape_1y", get("ln_cape", 1), -0.182, 0.02),
        GoldenCheck::new("predict.bubble_1y", get("bubble", 1), -0.180, 0.02),
        GoldenCheck::at_least("corr_ln_cape_ln_tr_cape", a.cape_tr_cape_correlation(), 0.99),
    ]);
    let real_g = d.real_growth();
    let tr_g = d.tr_growth();
    out.extend([
        GoldenCheck::new("sd_returns", d.return_sd(), 0.17076, 0.002),
        GoldenCheck::new("tr_growth.mean", mean(&tr_g), 0.05933, 0.001),
        GoldenCheck::new("tr_growth.sd", std_dev(&tr_g), 0.03566, 0.001),
        GoldenCheck::new("real_growth.mean", mean(&real_g), 0.01773, 0.0005),
        GoldenCheck::new("real_growth.sd", std_dev(&real_g), 0.03689, 0.001),
        GoldenCheck::new("mean_cape", d.mean_cape(), 17.0, 0.5),
        GoldenCheck::new("mean_tr_cape", d.mean_tr_cape(), 19.9, 0.5),
        GoldenCheck::new("cape_now", *d.cape.last().expect("non-empty"), 30.0, 0.5),
        GoldenCheck::new("tr_cape_now", *d.tr_cape.last().expect("non-empty"), 32.4, 0.5),
    ]);
    let el = earnings_linked_stats(0.0, &real_g)?;
    out.push(GoldenCheck::new("earnings_linked.mean_exp_neg_g", el.mean_exp_neg_g, 0.917, 0.01));
    for (w, m) in [(0.01, 0.074), (0.02, 0.064), (0.03, 0.055), (0.04, 0.046)] {
        let s = earnings_linked_stats(w, &real_g)?;
        out.push(GoldenCheck::new(&format!("earnings_linked.m_{}pct", (w * 100.0).round()), s.mean_withdrawal, m, 0.005));
    }
    Ok(out)
}
