//! Ordinary least squares via a Householder QR factorization.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::special::student_t_two_sided;
use crate::error::{Error, Result};

/// Result of an OLS regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    /// Two-sided Student-t p-values with `n - k` degrees of freedom.
    pub p_values: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Residual standard deviation with divisor `n - k`.
    pub sigma_hat: f64,
    pub r_squared: f64,
    pub n: usize,
    pub k: usize,
    /// Residual sum of squares.
    pub ssr: f64,
}

impl OlsFit {
    /// Gaussian log-likelihood evaluated at the ML variance `ssr / n`.
    pub fn log_likelihood(&self) -> f64 {
        let n = self.n as f64;
        -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + (self.ssr / n).ln() + 1.0)
    }

    /// Akaike information criterion `-2 llf + 2k`.
    pub fn aic(&self) -> f64 {
        -2.0 * self.log_likelihood() + 2.0 * self.k as f64
    }

    /// Fitted values `y - residuals`.
    pub fn fitted(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.residuals).map(|(a, e)| a - e).collect()
    }
}

/// Regress `y` on the columns of `x`.
///
/// `x` is given row-major as `n` rows of `k` regressors; include a column of
/// ones for an intercept. `r_squared` is centered when the design contains a
/// constant column and uncentered otherwise.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let n = y.len();
    if x.len() != n {
        return Err(Error::LengthMismatch { left: x.len(), right: n });
    }
    let k = x.first().map_or(0, Vec::len);
    if k == 0 || n <= k {
        return Err(Error::TooFewObservations { needed: k, got: n });
    }
    if x.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidParameter("ragged design matrix".into()));
    }

    let xm = DMatrix::from_fn(n, k, |i, j| x[i][j]);
    let yv = DVector::from_column_slice(y);
    let qr = xm.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..k).any(|i| r[(i, i)].abs() <= 1e-10 * max_diag.max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient)?;
    let resid = &yv - &xm * &beta;
    let ssr = resid.norm_squared();
    let df = (n - k) as f64;
    let sigma2 = ssr / df;

    // (X'X)^{-1} = R^{-1} R^{-T}
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::RankDeficient)?;
    let cov_unscaled = &r_inv * r_inv.transpose();

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let standard_errors: Vec<f64> = (0..k).map(|i| (sigma2 * cov_unscaled[(i, i)]).sqrt()).collect();
    let t_stats: Vec<f64> = coefficients
        .iter()
        .zip(&standard_errors)
        .map(|(b, s)| if *s > 0.0 { b / s } else if *b == 0.0 { 0.0 } else { f64::INFINITY.copysign(*b) })
        .collect();
    let p_values = t_stats.iter().map(|t| student_t_two_sided(*t, df)).collect();

    let has_const = (0..k).any(|j| x.iter().all(|row| row[j] == x[0][j]) && x[0][j] != 0.0);
    let tss = if has_const {
        let m = y.iter().sum::<f64>() / n as f64;
        y.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    } else {
        y.iter().map(|v| v * v).sum::<f64>()
    };
    let r_squared = if tss > 0.0 { (1.0 - ssr / tss).clamp(0.0, 1.0) } else { 1.0 };

    Ok(OlsFit {
        coefficients,
        standard_errors,
        t_stats,
        p_values,
        residuals: resid.iter().copied().collect(),
        sigma_hat: sigma2.sqrt(),
        r_squared,
        n,
        k,
        ssr,
    })
}

/// Design matrix `[1, x]` for a simple regression.
pub fn with_intercept(x: &[f64]) -> Vec<Vec<f64>> {
    x.iter().map(|v| vec![1.0, *v]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line_has_zero_residuals() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let fit = ols(&with_intercept(&xs), &y).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[1], -0.5, epsilon = 1e-12);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-12));
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn intercept_only_gives_mean() {
        let y = [1.0, 4.0, 2.0, 9.0];
        let x: Vec<Vec<f64>> = y.iter().map(|_| vec![1.0]).collect();
        let fit = ols(&x, &y).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn eight_point_normal_equations() {
        // Normal equations solved by hand:
        // Sx=36, Sy=41, Sxx=204, Sxy=219, n=8
        // b = (8*219 - 36*41)/(8*204 - 36^2) = 276/336, a = (41 - 36 b)/8
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let y = [2.0, 3.0, 5.0, 4.0, 6.0, 5.0, 8.0, 8.0];
        let fit = ols(&with_intercept(&x), &y).unwrap();
        let b = 276.0 / 336.0;
        let a = (41.0 - 36.0 * b) / 8.0;
        assert_abs_diff_eq!(fit.coefficients[1], b, epsilon = 1e-13);
        assert_abs_diff_eq!(fit.coefficients[0], a, epsilon = 1e-13);
    }

    #[test]
    fn collinear_design_is_rejected() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64, 2.0 * i as f64]).collect();
        let y = [1.0, 2.0, 3.0, 5.0, 4.0, 6.0];
        assert_eq!(ols(&x, &y), Err(Error::RankDeficient));
    }

    #[test]
    fn too_few_observations() {
        let x = with_intercept(&[1.0, 2.0]);
        assert!(matches!(ols(&x, &[1.0, 2.0]), Err(Error::TooFewObservations { .. })));
    }
}
