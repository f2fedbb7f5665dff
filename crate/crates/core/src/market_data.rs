//! Annual market data and the series derived from it.
//!
//! Index convention: row `t` of a table (`t = 0..=T`) carries the January
//! price `s(t)` and January CPI `C(t)` of its year together with the
//! dividends `d(t+1)` and earnings `e(t+1)` paid during that calendar year.
//! In derived series `S(t)` is the January price at the end of holding year
//! `t`, while `D(t)` and `E(t)` (`t >= 1`) are the dividends and earnings of
//! that holding year, deflated with the CPI of the following January. Entries
//! that are undefined for a given `t` are stored as `NaN`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::descriptive::{mean, std_dev};

/// One year of nominal data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketRow {
    pub year: i32,
    /// January price level.
    pub price: f64,
    /// Calendar-year dividends per share; `None` only on the final row.
    pub dividend: Option<f64>,
    /// Calendar-year earnings per share; `None` only on the final row.
    pub earnings: Option<f64>,
    /// January CPI level.
    pub cpi: f64,
}

/// Validated annual table with consecutive years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMarketTable {
    rows: Vec<MarketRow>,
}

pub const DEFAULT_WINDOW: usize = 10;

impl RawMarketTable {
    /// Validate rows for the default trailing window.
    pub fn new(rows: Vec<MarketRow>) -> Result<Self> {
        Self::with_window(rows, DEFAULT_WINDOW)
    }

    /// Validate rows, requiring at least `window + 2` of them.
    pub fn with_window(rows: Vec<MarketRow>, window: usize) -> Result<Self> {
        let needed = window + 2;
        if rows.len() < needed {
            return Err(Error::TooFewRows { needed, got: rows.len() });
        }
        for pair in rows.windows(2) {
            if pair[1].year != pair[0].year + 1 {
                return Err(Error::GapInYears { previous: pair[0].year, next: pair[1].year });
            }
        }
        let last = rows.len() - 1;
        for (i, r) in rows.iter().enumerate() {
            if !(r.price > 0.0) {
                return Err(Error::NonPositive { field: "price", year: r.year });
            }
            if !(r.cpi > 0.0) {
                return Err(Error::NonPositive { field: "cpi", year: r.year });
            }
            if i < last && (r.dividend.is_none() || r.earnings.is_none()) {
                return Err(Error::MalformedRow {
                    line: i + 2,
                    message: "dividend and earnings may only be missing on the final row".into(),
                });
            }
            if r.dividend.is_some_and(|d| d < 0.0) {
                return Err(Error::NonPositive { field: "dividend", year: r.year });
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[MarketRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of holding years `T` covered by the table.
    pub fn horizon(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn first_year(&self) -> i32 {
        self.rows[0].year
    }

    pub fn cpi(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cpi).collect()
    }
}

fn parse_cell(cell: &str, line: usize, name: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::MalformedRow { line, message: format!("{name}: cannot parse {cell:?}") })
}

/// Parse `year,price,dividend,earnings,cpi` CSV content into a validated table.
pub fn parse_market_csv(content: &[u8]) -> Result<RawMarketTable> {
    parse_market_csv_with_window(content, DEFAULT_WINDOW)
}

/// As [`parse_market_csv`], validating against a custom trailing window.
pub fn parse_market_csv_with_window(content: &[u8], window: usize) -> Result<RawMarketTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(content);
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRow { line: 1, message: e.to_string() })?
        .clone();
    let expected = ["year", "price", "dividend", "earnings", "cpi"];
    if headers.len() != expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::MalformedRow { line, message: e.to_string() })?;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if record.len() != 5 {
            return Err(Error::MalformedRow { line, message: format!("expected 5 fields, got {}", record.len()) });
        }
        let year = record[0]
            .trim()
            .parse::<i32>()
            .map_err(|_| Error::MalformedRow { line, message: format!("year: cannot parse {:?}", &record[0]) })?;
        let required = |idx: usize, name: &str| -> Result<f64> {
            parse_cell(&record[idx], line, name)?
                .ok_or_else(|| Error::MalformedRow { line, message: format!("{name} is empty") })
        };
        rows.push(MarketRow {
            year,
            price: required(1, "price")?,
            dividend: parse_cell(&record[2], line, "dividend")?,
            earnings: parse_cell(&record[3], line, "earnings")?,
            cpi: required(4, "cpi")?,
        });
    }
    RawMarketTable::with_window(rows, window)
}

/// The bundled 1871-2020 table.
pub fn bundled_table() -> RawMarketTable {
    parse_market_csv(crate::SHILLER_ANNUAL_CSV.as_bytes()).expect("bundled data is valid")
}

/// Real (final-year dollar) price, dividend and earnings series.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSeries {
    /// `S(t)`, `t = 0..=T`.
    pub s: Vec<f64>,
    /// `D(t)`, `t = 0..=T` with `D(0) = NaN`.
    pub d: Vec<f64>,
    /// `E(t)`, `t = 0..=T` with `E(0) = NaN`.
    pub e: Vec<f64>,
}

/// Convert nominal values into units of the final CPI observation.
///
/// Prices use the CPI of their own January; dividends and earnings of holding
/// year `t` use the CPI of January `t`, the end of that holding year.
pub fn deflate(raw: &RawMarketTable) -> RealSeries {
    let rows = raw.rows();
    let t_max = rows.len() - 1;
    let c_t = rows[t_max].cpi;
    let s = rows.iter().map(|r| c_t / r.cpi * r.price).collect();
    let mut d = vec![f64::NAN; t_max + 1];
    let mut e = vec![f64::NAN; t_max + 1];
    for t in 1..=t_max {
        let ratio = c_t / rows[t].cpi;
        d[t] = rows[t - 1].dividend.map_or(f64::NAN, |v| ratio * v);
        e[t] = rows[t - 1].earnings.map_or(f64::NAN, |v| ratio * v);
    }
    RealSeries { s, d, e }
}

/// Log total returns `R(t) = ln((S(t) + D(t)) / S(t-1))`, `t = 1..=T`.
///
/// `s` has length `T + 1`; `d` is indexed like `s` (entry 0 ignored).
pub fn total_returns(s: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    if d.len() != s.len() {
        return Err(Error::LengthMismatch { left: s.len(), right: d.len() });
    }
    (1..s.len())
        .map(|t| {
            let num = s[t] + d[t];
            if !(num > 0.0) || !(s[t - 1] > 0.0) {
                return Err(Error::NonPositive { field: "price plus dividend", year: t as i32 });
            }
            Ok((num / s[t - 1]).ln())
        })
        .collect()
}

/// Wealth `V(0) = 1`, `V(t) = V(t-1) exp(R(t))`.
pub fn wealth(r: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(r.len() + 1);
    v.push(1.0);
    let mut acc = 1.0;
    for x in r {
        acc *= x.exp();
        v.push(acc);
    }
    v
}

/// Inclusive trailing mean; `out[i]` averages `x[i..i + window]`, so output
/// position `i` corresponds to input position `i + window - 1`.
pub fn trailing_average(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window > x.len() {
        return Err(Error::WindowTooLarge { window, len: x.len() });
    }
    Ok(x.windows(window).map(|w| w.iter().sum::<f64>() / window as f64).collect())
}

/// Every inflation-adjusted series and valuation measure, indexed by `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSeries {
    /// Year of the January price at index `t`.
    pub years: Vec<i32>,
    pub s: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    /// `R(t)`, NaN at `t = 0`.
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    pub e10: Vec<f64>,
    pub ebar: Vec<f64>,
    pub ebar10: Vec<f64>,
    /// Classic CAPE `F = S / E10`.
    pub cape: Vec<f64>,
    /// TR-CAPE `G = V / Ebar10`.
    pub tr_cape: Vec<f64>,
    /// `H = V / E10`.
    pub modified_ratio: Vec<f64>,
    pub window: usize,
    /// First index at which the trailing averages are defined.
    pub base_index: usize,
}

/// Build all derived series from a raw table.
pub fn build_derived(raw: &RawMarketTable, window: usize) -> Result<DerivedSeries> {
    let t_max = raw.horizon();
    if window == 0 || window + 1 > raw.len() {
        return Err(Error::WindowTooLarge { window, len: raw.len() });
    }
    let RealSeries { s, d, e } = deflate(raw);
    let r_tail = total_returns(&s, &d)?;
    let v = wealth(&r_tail);
    let mut r = vec![f64::NAN];
    r.extend(r_tail);

    let mut ebar = vec![f64::NAN; t_max + 1];
    for t in 1..=t_max {
        ebar[t] = v[t] / s[t] * e[t];
    }
    let mut e10 = vec![f64::NAN; t_max + 1];
    let mut ebar10 = vec![f64::NAN; t_max + 1];
    for (i, m) in trailing_average(&e[1..], window)?.into_iter().enumerate() {
        e10[i + window] = m;
    }
    for (i, m) in trailing_average(&ebar[1..], window)?.into_iter().enumerate() {
        ebar10[i + window] = m;
    }
    if let Some(t) = (window..=t_max).find(|&t| !(e10[t] > 0.0)) {
        return Err(Error::NonPositive { field: "trailing earnings", year: raw.rows()[t].year });
    }
    let cape = (0..=t_max).map(|t| s[t] / e10[t]).collect();
    let tr_cape = (0..=t_max).map(|t| v[t] / ebar10[t]).collect();
    let modified_ratio = (0..=t_max).map(|t| v[t] / e10[t]).collect();
    Ok(DerivedSeries {
        years: raw.rows().iter().map(|r| r.year).collect(),
        s,
        d,
        e,
        r,
        v,
        e10,
        ebar,
        ebar10,
        cape,
        tr_cape,
        modified_ratio,
        window,
        base_index: window,
    })
}

impl DerivedSeries {
    /// Final index `T`.
    pub fn horizon(&self) -> usize {
        self.s.len() - 1
    }

    /// `(t, ln x(t))` for `t = base_index..=T`.
    fn log_from_base(&self, x: &[f64]) -> Vec<f64> {
        x[self.base_index..].iter().map(|v| v.ln()).collect()
    }

    /// `ln G(t)` for `t = base_index..=T`.
    pub fn ln_tr_cape(&self) -> Vec<f64> {
        self.log_from_base(&self.tr_cape)
    }

    /// `ln F(t)` for `t = base_index..=T`.
    pub fn ln_cape(&self) -> Vec<f64> {
        self.log_from_base(&self.cape)
    }

    /// `ln H(t)` for `t = base_index..=T`.
    pub fn ln_modified_ratio(&self) -> Vec<f64> {
        self.log_from_base(&self.modified_ratio)
    }

    /// Time index `t = base_index..=T` as floats.
    pub fn t_index(&self) -> Vec<f64> {
        (self.base_index..=self.horizon()).map(|t| t as f64).collect()
    }

    /// Real trailing-earnings growth `ln E10(t) - ln E10(t-1)`, `t = base_index+1..=T`.
    pub fn real_growth(&self) -> Vec<f64> {
        log_diff(&self.e10[self.base_index..])
    }

    /// Total-return-adjusted growth `ln Ebar10(t) - ln Ebar10(t-1)`, `t = base_index+1..=T`.
    pub fn tr_growth(&self) -> Vec<f64> {
        log_diff(&self.ebar10[self.base_index..])
    }

    /// Returns `R(t)` for `t = base_index+1..=T`, the window aligned with the growth series.
    pub fn returns_after_base(&self) -> &[f64] {
        &self.r[self.base_index + 1..]
    }

    /// Sample standard deviation of `R(t)` over `t = base_index+1..=T`.
    pub fn return_sd(&self) -> f64 {
        std_dev(self.returns_after_base())
    }

    /// Mean classic CAPE over `t = base_index..=T`.
    pub fn mean_cape(&self) -> f64 {
        mean(&self.cape[self.base_index..])
    }

    /// Mean TR-CAPE over `t = base_index..=T`.
    pub fn mean_tr_cape(&self) -> f64 {
        mean(&self.tr_cape[self.base_index..])
    }

    /// CSV with header `year,S,D,E,R,V,E10,Ebar,Ebar10,cape,tr_cape,H`; NaN cells are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("year,S,D,E,R,V,E10,Ebar,Ebar10,cape,tr_cape,H\n");
        for t in 0..=self.horizon() {
            let cells = [
                self.s[t],
                self.d[t],
                self.e[t],
                self.r[t],
                self.v[t],
                self.e10[t],
                self.ebar[t],
                self.ebar10[t],
                self.cape[t],
                self.tr_cape[t],
                self.modified_ratio[t],
            ];
            out.push_str(&self.years[t].to_string());
            for c in cells {
                out.push(',');
                if c.is_finite() {
                    out.push_str(&c.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

fn log_diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
}

/// Parse a derived-series CSV back into column vectors keyed by header.
pub fn parse_derived_csv(content: &[u8]) -> Result<Vec<(String, Vec<f64>)>> {
    let mut reader = csv::Reader::from_reader(content);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::MalformedRow { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::MalformedRow { line: i + 2, message: e.to_string() })?;
        for (j, cell) in rec.iter().enumerate() {
            cols[j].push(parse_cell(cell, i + 2, &headers[j])?.unwrap_or(f64::NAN));
        }
    }
    Ok(headers.into_iter().zip(cols).collect())
}

/// Nominal annual rates by year, e.g. the bundled January GS10 file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub years: Vec<i32>,
    /// Nominal annual yields as decimals (0.05 = 5%).
    pub nominal: Vec<f64>,
}

/// Parse `year,nominal_rate` CSV content.
pub fn parse_rate_csv(content: &[u8]) -> Result<RateTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(content);
    let mut years = Vec::new();
    let mut nominal = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::MalformedRow { line, message: e.to_string() })?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let year = rec
            .get(0)
            .and_then(|c| c.parse::<i32>().ok())
            .ok_or_else(|| Error::MalformedRow { line, message: "bad year".into() })?;
        let rate = parse_cell(rec.get(1).unwrap_or(""), line, "nominal_rate")?
            .ok_or_else(|| Error::MalformedRow { line, message: "nominal_rate is empty".into() })?;
        if let Some(&prev) = years.last() {
            if year != prev + 1 {
                return Err(Error::GapInYears { previous: prev, next: year });
            }
        }
        years.push(year);
        nominal.push(rate);
    }
    Ok(RateTable { years, nominal })
}

/// The bundled January GS10 rates.
pub fn bundled_rates() -> RateTable {
    parse_rate_csv(crate::GS10_JANUARY_CSV.as_bytes()).expect("bundled rates are valid")
}

/// Real log risk-free rate for holding years `t = window+1..=T`.
///
/// The rate for holding year `t` is the continuously compounded nominal yield
/// quoted in the January that starts the year, minus the average annual log
/// CPI inflation over the preceding `window` years. The result aligns with
/// [`DerivedSeries::real_growth`].
pub fn real_riskfree(raw: &RawMarketTable, rates: &RateTable, window: usize) -> Result<Vec<f64>> {
    let t_max = raw.horizon();
    let cpi = raw.cpi();
    let first = raw.first_year();
    (window + 1..=t_max)
        .map(|t| {
            let year = first + (t as i32 - 1);
            let idx = rates
                .years
                .iter()
                .position(|&y| y == year)
                .ok_or_else(|| Error::InvalidParameter(format!("no rate for year {year}")))?;
            let inflation = (cpi[t - 1] / cpi[t - 1 - window]).ln() / window as f64;
            Ok((1.0 + rates.nominal[idx]).ln() - inflation)
        })
        .collect()
}
