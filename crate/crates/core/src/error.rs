use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed row at line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("gap in years: {previous} followed by {next}")]
    GapInYears { previous: i32, next: i32 },
    #[error("non-positive {field} in year {year}")]
    NonPositive { field: &'static str, year: i32 },
    #[error("too few rows: need at least {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("window {window} too large for series of length {len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("too few observations: need more than {needed}, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("degenerate series: {0}")]
    DegenerateSeries(&'static str),
    #[error("sample size {0} outside the supported range")]
    SampleSizeOutOfRange(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time step too large: dt * lipschitz = {0}")]
    StepTooLarge(f64),
    #[error("grid unstable: {0}")]
    GridUnstable(String),
    #[error("theta became non-positive at grid index {0}")]
    NonPositiveTheta(usize),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

impl Error {
    /// Whether the error stems from bad input rather than a numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedRow { .. }
                | Error::GapInYears { .. }
                | Error::NonPositive { .. }
                | Error::TooFewRows { .. }
                | Error::WindowTooLarge { .. }
                | Error::LengthMismatch { .. }
                | Error::TooFewObservations { .. }
                | Error::SampleSizeOutOfRange(_)
                | Error::InvalidParameter(_)
        )
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedRow { .. } => "MalformedRow",
            Error::GapInYears { .. } => "GapInYears",
            Error::NonPositive { .. } => "NonPositive",
            Error::TooFewRows { .. } => "TooFewRows",
            Error::WindowTooLarge { .. } => "WindowTooLarge",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::RankDeficient => "RankDeficient",
            Error::TooFewObservations { .. } => "TooFewObservations",
            Error::DegenerateSeries(_) => "DegenerateSeries",
            Error::SampleSizeOutOfRange(_) => "SampleSizeOutOfRange",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::StepTooLarge(_) => "StepTooLarge",
            Error::GridUnstable(_) => "GridUnstable",
            Error::NonPositiveTheta(_) => "NonPositiveTheta",
            Error::NoConvergence { .. } => "NoConvergence",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
