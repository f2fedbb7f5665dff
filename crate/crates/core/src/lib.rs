//! Stock-market valuation measures and the models built on them.
//!
//! The crate covers annual market-data ingestion (CAPE, TR-CAPE and the
//! detrended bubble measure), the AR(1) valuation models with their
//! diagnostic battery, a discrete-time wealth model with withdrawal-rate ruin
//! simulation, and a continuous-time Ornstein-Uhlenbeck / Lévy factor model
//! with Merton-style portfolio and consumption rules.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuous;
pub mod discrete;
pub mod error;
pub mod market_data;
pub mod report;
pub mod rng;
pub mod ruin;
pub mod stats;
pub mod valuation;

pub use error::{Error, Result};

/// Annual S&P composite data 1871-2020 (January price and CPI, December
/// trailing-twelve-month dividends and earnings), from Shiller's April 2020
/// monthly file.
pub const SHILLER_ANNUAL_CSV: &str = include_str!("../data/shiller_annual_1871_2020.csv");

/// January 10-year Treasury yields 1871-2020 from the same file, used as the
/// nominal rate input for the real risk-free series.
pub const GS10_JANUARY_CSV: &str = include_str!("../data/gs10_january_1871_2020.csv");
