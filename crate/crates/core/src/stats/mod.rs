//! Statistics kernel: special functions, OLS and the diagnostic tests.

pub mod descriptive;
pub mod hypothesis;
pub mod ols;
pub mod special;

pub use descriptive::{mean, pearson, ranks, std_dev, variance};
pub use hypothesis::{
    adf_test, autocorrelations, correlation_test, jarque_bera, ljung_box, ljung_box_with, mackinnon_p_value,
    shapiro_wilk, t_test, AcfNormalization, CorrelationKind, TestName, TestReport,
};
pub use ols::{ols, with_intercept, OlsFit};
