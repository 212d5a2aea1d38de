//! Price series: the simulated generator and the CSV interchange format.
//!
//! The generator runs, per stock, the latent pair
//! `y_{t+1} = eta1 * y_t + eps_t` and `x_{t+1} = x_t + y_t + eta2 * v_t`
//! from `(0, 0)`, then maps `p_t = exp(x_t / (max_t x - min_t x))`. Because
//! the exponent is normalized by the path's own range, each stock's
//! max/min price ratio is exactly `e`, and all prices live in `[1/e, e]`.
//!
//! CSV files are long-format with header `date,ticker,price`, ISO-8601 dates,
//! UTF-8. Rows may arrive in any order; loading sorts dates ascending and
//! tickers lexicographically, rejects non-positive prices and duplicates, and
//! demands a complete date grid per ticker.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense price grid: `rows` dates by `cols` stocks.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceMatrix {
    rows: usize,
    cols: usize,
    /// Row-major: `data[t * cols + n]`.
    data: Vec<f64>,
    /// Column labels; synthetic matrices get `S00, S01, ...`.
    tickers: Vec<String>,
    /// Row labels; synthetic matrices get a generated weekday-agnostic
    /// calendar sequence.
    dates: Vec<String>,
}

impl PriceMatrix {
    pub fn new(
        data: Vec<f64>,
        rows: usize,
        cols: usize,
        tickers: Vec<String>,
        dates: Vec<String>,
    ) -> Result<Self> {
        if data.len() != rows * cols || tickers.len() != cols || dates.len() != rows {
            return Err(Error::ShapeMismatch {
                what: "price matrix",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::PriceData {
                message: "prices must be finite and positive".into(),
            });
        }
        Ok(PriceMatrix {
            rows,
            cols,
            data,
            tickers,
            dates,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    /// Price of stock `n` at date row `t`.
    pub fn get(&self, t: usize, n: usize) -> f64 {
        self.data[t * self.cols + n]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    /// Max/min price ratio of stock `n` over all rows.
    pub fn price_ratio(&self, n: usize) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in 0..self.rows {
            let p = self.get(t, n);
            lo = lo.min(p);
            hi = hi.max(p);
        }
        hi / lo
    }
}

/// Zero-mean noise: `N(0, normal_std^2)` plus a centered coin flip of
/// amplitude `binomial_scale / 2`. Bimodal when `binomial_scale > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub normal_std: f64,
    pub binomial_scale: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.normal_std >= 0.0) || !self.normal_std.is_finite() {
            return Err(Error::config("normal_std must be >= 0 and finite"));
        }
        if !(self.binomial_scale >= 0.0) || !self.binomial_scale.is_finite() {
            return Err(Error::config("binomial_scale must be >= 0 and finite"));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        // Fixed draw order keeps generation reproducible: normal, then coin.
        let n = if self.normal_std > 0.0 {
            Normal::new(0.0, self.normal_std).expect("validated std").sample(rng)
        } else {
            0.0
        };
        let flip = if rng.gen::<f64>() < 0.5 { -0.5 } else { 0.5 };
        n + flip * self.binomial_scale
    }
}

/// Latent-walk price generator; all stocks are independent copies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceModel {
    /// `eta1`, persistence of the latent velocity; must lie in (0, 1).
    pub persistence: f64,
    /// `eta2`, scale on the walk noise.
    pub noise_scale: f64,
    /// Noise on the velocity recursion (`eps_t`).
    pub ar_noise: NoiseSpec,
    /// Noise on the walk recursion (`v_t`).
    pub walk_noise: NoiseSpec,
}

impl PriceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.persistence > 0.0 && self.persistence < 1.0) {
            return Err(Error::config(format!(
                "persistence must lie in (0, 1), got {}",
                self.persistence
            )));
        }
        if !self.noise_scale.is_finite() {
            return Err(Error::config("noise_scale must be finite"));
        }
        self.ar_noise.validate()?;
        self.walk_noise.validate()
    }
}

impl Default for PriceModel {
    /// Desk-scale defaults: mildly persistent velocity, bimodal shocks.
    fn default() -> Self {
        PriceModel {
            persistence: 0.9,
            noise_scale: 0.3,
            ar_noise: NoiseSpec {
                normal_std: 0.1,
                binomial_scale: 0.2,
            },
            walk_noise: NoiseSpec {
                normal_std: 0.1,
                binomial_scale: 0.2,
            },
        }
    }
}

/// Generates `rows` price rows for `stocks` independent stocks.
///
/// Stocks are generated one at a time (stock 0 fully, then stock 1, ...), so
/// adding a stock never perturbs earlier columns for a fixed seed. A constant
/// latent path (zero range) falls back to `p == 1` for that stock.
pub fn generate_prices(
    model: &PriceModel,
    stocks: usize,
    rows: usize,
    rng: &mut dyn RngCore,
) -> Result<PriceMatrix> {
    model.validate()?;
    if stocks == 0 || rows < 2 {
        return Err(Error::config(
            "price generation needs at least 1 stock and 2 rows",
        ));
    }
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(stocks);
    for _ in 0..stocks {
        let mut xs = Vec::with_capacity(rows);
        let mut y = 0.0f64;
        let mut x = 0.0f64;
        xs.push(x);
        for _ in 1..rows {
            let eps = model.ar_noise.draw(rng);
            let v = model.walk_noise.draw(rng);
            let x_next = x + y + model.noise_scale * v;
            let y_next = model.persistence * y + eps;
            x = x_next;
            y = y_next;
            xs.push(x);
        }
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        let prices: Vec<f64> = if range == 0.0 {
            vec![1.0; rows]
        } else {
            // x0 = 0 sits inside [lo, hi], so exponents stay within [-1, 1].
            xs.iter().map(|x| (x / range).exp()).collect()
        };
        columns.push(prices);
    }
    let mut data = Vec::with_capacity(rows * stocks);
    for t in 0..rows {
        for column in &columns {
            data.push(column[t]);
        }
    }
    let tickers = (0..stocks).map(|n| format!("S{n:02}")).collect();
    let dates = date_sequence(2020, 1, 1, rows);
    PriceMatrix::new(data, rows, stocks, tickers, dates)
}

// ---------------------------------------------------------------------------
// CSV interchange
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize, Serialize)]
struct PriceRow {
    date: String,
    ticker: String,
    price: f64,
}

/// Loads a long-format price CSV into a dense matrix.
///
/// Requires the exact header `date,ticker,price`. Dates sort ascending,
/// tickers lexicographically. Errors on malformed dates, non-positive
/// prices, duplicate (ticker, date) pairs, and missing dates per ticker.
pub fn load_prices_csv(path: &Path) -> Result<PriceMatrix> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::PriceData {
        message: format!("{}: {e}", path.display()),
    })?;
    {
        let headers = reader.headers()?;
        let want = ["date", "ticker", "price"];
        if headers.len() != 3 || headers.iter().zip(want).any(|(h, w)| h != w) {
            return Err(Error::PriceData {
                message: format!(
                    "expected header date,ticker,price; got {}",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
    }

    let mut by_ticker: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut all_dates: BTreeSet<String> = BTreeSet::new();
    for (i, record) in reader.deserialize::<PriceRow>().enumerate() {
        let line = i + 2; // 1-based, after the header
        let row: PriceRow = record.map_err(|e| Error::PriceData {
            message: format!("line {line}: {e}"),
        })?;
        if !is_iso_date(&row.date) {
            return Err(Error::PriceData {
                message: format!("line {line}: '{}' is not an ISO-8601 date", row.date),
            });
        }
        if !row.price.is_finite() || row.price <= 0.0 {
            return Err(Error::PriceData {
                message: format!(
                    "line {line}: price {} for {} on {} must be positive",
                    row.price, row.ticker, row.date
                ),
            });
        }
        all_dates.insert(row.date.clone());
        let series = by_ticker.entry(row.ticker.clone()).or_default();
        if series.insert(row.date.clone(), row.price).is_some() {
            return Err(Error::PriceData {
                message: format!(
                    "line {line}: duplicate entry for {} on {}",
                    row.ticker, row.date
                ),
            });
        }
    }
    if by_ticker.is_empty() {
        return Err(Error::PriceData {
            message: "no data rows".into(),
        });
    }

    let mut gaps = Vec::new();
    for (ticker, series) in &by_ticker {
        for date in &all_dates {
            if !series.contains_key(date) {
                gaps.push((ticker.clone(), date.clone()));
            }
        }
    }
    if !gaps.is_empty() {
        return Err(Error::PriceGaps { gaps });
    }

    let dates: Vec<String> = all_dates.into_iter().collect();
    let tickers: Vec<String> = by_ticker.keys().cloned().collect();
    let mut data = Vec::with_capacity(dates.len() * tickers.len());
    for date in &dates {
        for ticker in &tickers {
            data.push(by_ticker[ticker][date]);
        }
    }
    let (rows, cols) = (dates.len(), tickers.len());
    PriceMatrix::new(data, rows, cols, tickers, dates)
}

/// Writes the matrix in the long CSV format, dates outer and tickers inner,
/// both in stored order. Output is byte-deterministic for a given matrix.
pub fn write_prices_csv(matrix: &PriceMatrix, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for t in 0..matrix.rows() {
        for n in 0..matrix.cols() {
            writer.serialize(PriceRow {
                date: matrix.dates()[t].clone(),
                ticker: matrix.tickers()[n].clone(),
                price: matrix.get(t, n),
            })?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Strict `YYYY-MM-DD` with a valid Gregorian calendar day.
pub fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| -> Option<u32> {
        let mut acc = 0u32;
        for &c in &b[r] {
            if !c.is_ascii_digit() {
                return None;
            }
            acc = acc * 10 + u32::from(c - b'0');
        }
        Some(acc)
    };
    let (Some(y), Some(m), Some(d)) = (digits(0..4), digits(5..7), digits(8..10)) else {
        return false;
    };
    (1..=12).contains(&m) && d >= 1 && d <= days_in_month(y as i32, m)
}

fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if is_leap(year) {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

/// `n` consecutive calendar dates starting at the given day.
pub fn date_sequence(mut year: i32, mut month: u32, mut day: u32, n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(format!("{year:04}-{month:02}-{day:02}"));
        day += 1;
        if day > days_in_month(year, month) {
            day = 1;
            month += 1;
            if month > 12 {
                month = 1;
                year += 1;
            }
        }
    }
    out
}
