//! AR(1) models for ln TR-CAPE and for the detrended bubble measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::hypothesis::{
    adf_test, correlation_test, jarque_bera, ljung_box, shapiro_wilk, t_test, CorrelationKind, TestReport,
};
use crate::stats::ols::{ols, with_intercept, OlsFit};
use crate::stats::pearson;

/// Ljung-Box lags reported for every fit.
pub const LJUNG_BOX_LAGS: [usize; 4] = [5, 10, 15, 20];

/// A diagnostic with a label saying what it was applied to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub target: String,
    #[serde(flatten)]
    pub report: TestReport,
}

/// Fitted `x(t) = alpha + beta x(t-1) + eps(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ar1Fit {
    pub alpha: f64,
    pub beta: f64,
    pub sigma_eps: f64,
    pub residuals: Vec<f64>,
    pub long_run_mean: f64,
    pub ols: OlsFit,
    pub diagnostics: Vec<Diagnostic>,
}

/// Fitted trend-AR(1) for `ln H`, with the bubble measure `B = ln H - c t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleFit {
    pub alpha_h: f64,
    pub beta_h: f64,
    pub c: f64,
    pub sigma_eps: f64,
    /// Long-run mean `h = alpha_h / (1 - beta_h)`.
    pub h: f64,
    /// `B(t)` aligned with the input series.
    pub b_series: Vec<f64>,
    /// Regression coefficients of `Δ ln H(t)` on `[1, ln H(t-1), t-1]`.
    pub raw_coeffs: [f64; 3],
    pub residuals: Vec<f64>,
    pub ols: OlsFit,
    pub diagnostics: Vec<Diagnostic>,
}

fn residual_diagnostics(resid: &[f64], out: &mut Vec<Diagnostic>) -> Result<()> {
    let abs: Vec<f64> = resid.iter().map(|e| e.abs()).collect();
    for lag in LJUNG_BOX_LAGS {
        out.push(Diagnostic { target: "residuals".into(), report: ljung_box(resid, lag)? });
    }
    for lag in LJUNG_BOX_LAGS {
        out.push(Diagnostic { target: "abs_residuals".into(), report: ljung_box(&abs, lag)? });
    }
    out.push(Diagnostic { target: "residuals".into(), report: shapiro_wilk(resid)? });
    out.push(Diagnostic { target: "residuals".into(), report: jarque_bera(resid)? });
    Ok(())
}

fn correlation_diagnostics(resid: &[f64], growth: &[f64], out: &mut Vec<Diagnostic>) -> Result<()> {
    if growth.len() != resid.len() {
        return Err(Error::LengthMismatch { left: resid.len(), right: growth.len() });
    }
    let abs_r: Vec<f64> = resid.iter().map(|e| e.abs()).collect();
    let abs_g: Vec<f64> = growth.iter().map(|e| e.abs()).collect();
    for kind in [CorrelationKind::Pearson, CorrelationKind::Spearman, CorrelationKind::Kendall] {
        out.push(Diagnostic { target: "residuals_vs_growth".into(), report: correlation_test(resid, growth, kind)? });
        out.push(Diagnostic {
            target: "abs_residuals_vs_abs_growth".into(),
            report: correlation_test(&abs_r, &abs_g, kind)?,
        });
    }
    Ok(())
}

/// Fit `ln G(t) = alpha + beta ln G(t-1) + eps(t)`.
///
/// `growth`, when given, must align with the residuals (one value per
/// `t = 1..` of the input) and is correlated against them.
pub fn fit_tr_cape(ln_g: &[f64], growth: Option<&[f64]>) -> Result<Ar1Fit> {
    if ln_g.len() < 30 {
        return Err(Error::TooFewObservations { needed: 29, got: ln_g.len() });
    }
    let fit = ar1_ols(ln_g)?;
    let mut diagnostics = Vec::new();
    residual_diagnostics(&fit.residuals, &mut diagnostics)?;
    diagnostics.push(Diagnostic { target: "series".into(), report: adf_test(ln_g)? });
    if let Some(g) = growth {
        correlation_diagnostics(&fit.residuals, g, &mut diagnostics)?;
    }
    Ok(ar1_from_ols(fit, diagnostics))
}

fn ar1_ols(x: &[f64]) -> Result<OlsFit> {
    ols(&with_intercept(&x[..x.len() - 1]), &x[1..])
}

fn ar1_from_ols(fit: OlsFit, diagnostics: Vec<Diagnostic>) -> Ar1Fit {
    let (alpha, beta) = (fit.coefficients[0], fit.coefficients[1]);
    Ar1Fit {
        alpha,
        beta,
        sigma_eps: fit.sigma_hat,
        residuals: fit.residuals.clone(),
        long_run_mean: alpha / (1.0 - beta),
        ols: fit,
        diagnostics,
    }
}

/// Plain AR(1) fit without diagnostics.
pub fn fit_ar1(x: &[f64]) -> Result<Ar1Fit> {
    if x.len() < 3 {
        return Err(Error::TooFewObservations { needed: 2, got: x.len() });
    }
    Ok(ar1_from_ols(ar1_ols(x)?, Vec::new()))
}

/// Fit the trend-AR(1) for `ln H` and recover the bubble-measure parameters.
///
/// Regresses `ln H(t) - ln H(t-1)` on `[1, ln H(t-1), t-1]`. With raw
/// coefficients `(a, b, d)`: `beta_h = 1 + b`, `c = d / (1 - beta_h)`,
/// `alpha_h = a - c`, `h = alpha_h / (1 - beta_h)`.
pub fn fit_bubble(ln_h: &[f64], t_index: &[f64]) -> Result<BubbleFit> {
    if ln_h.len() != t_index.len() {
        return Err(Error::LengthMismatch { left: ln_h.len(), right: t_index.len() });
    }
    if ln_h.len() < 30 {
        return Err(Error::TooFewObservations { needed: 29, got: ln_h.len() });
    }
    let x: Vec<Vec<f64>> = (1..ln_h.len()).map(|i| vec![1.0, ln_h[i - 1], t_index[i - 1]]).collect();
    let y: Vec<f64> = ln_h.windows(2).map(|w| w[1] - w[0]).collect();
    let fit = ols(&x, &y)?;
    let [a, b, d] = [fit.coefficients[0], fit.coefficients[1], fit.coefficients[2]];
    if b == 0.0 {
        return Err(Error::RankDeficient);
    }
    let beta_h = 1.0 + b;
    let c = d / (1.0 - beta_h);
    let alpha_h = a - c;
    let h = alpha_h / (1.0 - beta_h);
    let b_series = ln_h.iter().zip(t_index).map(|(l, t)| l - c * t).collect();
    let mut diagnostics = Vec::new();
    residual_diagnostics(&fit.residuals, &mut diagnostics)?;
    diagnostics.push(Diagnostic {
        target: "slope_vs_unit_root".into(),
        report: t_test(b, fit.standard_errors[1], 0.0, (fit.n - fit.k) as f64),
    });
    Ok(BubbleFit {
        alpha_h,
        beta_h,
        c,
        sigma_eps: fit.sigma_hat,
        h,
        b_series,
        raw_coeffs: [a, b, d],
        residuals: fit.residuals.clone(),
        ols: fit,
        diagnostics,
    })
}

impl BubbleFit {
    /// Raw regression coefficients implied by `(alpha_h, beta_h, c)`.
    pub fn reconstructed_raw(&self) -> [f64; 3] {
        [self.alpha_h + self.c, self.beta_h - 1.0, self.c * (1.0 - self.beta_h)]
    }

    /// Two-sided t-test of `beta_h` against `null_beta` (1 tests for a unit root).
    pub fn slope_test(&self, null_beta: f64) -> TestReport {
        student_t_slope_test(&self.ols, 1, null_beta - 1.0)
    }
}

impl Ar1Fit {
    /// Two-sided t-test of `beta` against `null_beta`.
    pub fn slope_test(&self, null_beta: f64) -> TestReport {
        student_t_slope_test(&self.ols, 1, null_beta)
    }
}

/// Two-sided t-test of coefficient `index` of an OLS fit against `null_value`.
pub fn student_t_slope_test(fit: &OlsFit, index: usize, null_value: f64) -> TestReport {
    t_test(fit.coefficients[index], fit.standard_errors[index], null_value, (fit.n - fit.k) as f64)
}

/// Correlation of `measure(t)` with the mean of `R(t+1..=t+horizon)`.
///
/// Both slices are indexed by the same `t`; NaN marks missing values. Every
/// `t` with a finite measure and a complete finite forward window is used.
pub fn predictive_correlation(measure: &[f64], r: &[f64], horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if measure.len() != r.len() {
        return Err(Error::LengthMismatch { left: measure.len(), right: r.len() });
    }
    let (xs, ys) = forward_pairs(measure, r, horizon);
    if xs.len() < 3 {
        return Err(Error::TooFewObservations { needed: 2, got: xs.len() });
    }
    Ok(pearson(&xs, &ys))
}

/// Pairs `(measure(t), mean R(t+1..=t+horizon))` used by [`predictive_correlation`].
pub fn forward_pairs(measure: &[f64], r: &[f64], horizon: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in 0..measure.len().saturating_sub(horizon) {
        let window = &r[t + 1..=t + horizon];
        if measure[t].is_finite() && window.iter().all(|v| v.is_finite()) {
            xs.push(measure[t]);
            ys.push(window.iter().sum::<f64>() / horizon as f64);
        }
    }
    (xs, ys)
}

/// JSON shape of a fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub coefficients: Vec<f64>,
    pub implied: Implied,
    pub diagnostics: Vec<Diagnostic>,
}

/// Implied parameters of a fit; `c` is zero for the TR-CAPE model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Implied {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub h: f64,
    pub sigma_eps: f64,
}

impl From<&Ar1Fit> for FitReport {
    fn from(f: &Ar1Fit) -> Self {
        FitReport {
            model: "tr_cape_ar1".into(),
            coefficients: f.ols.coefficients.clone(),
            implied: Implied { alpha: f.alpha, beta: f.beta, c: 0.0, h: f.long_run_mean, sigma_eps: f.sigma_eps },
            diagnostics: f.diagnostics.clone(),
        }
    }
}

impl From<&BubbleFit> for FitReport {
    fn from(f: &BubbleFit) -> Self {
        FitReport {
            model: "bubble_trend_ar1".into(),
            coefficients: f.raw_coeffs.to_vec(),
            implied: Implied { alpha: f.alpha_h, beta: f.beta_h, c: f.c, h: f.h, sigma_eps: f.sigma_eps },
            diagnostics: f.diagnostics.clone(),
        }
    }
}
