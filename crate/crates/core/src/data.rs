//! Price ingestion, log returns, panel alignment and summary diagnostics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mathcore::Matrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: price {value} is not positive")]
    NonPositivePrice { line: u64, value: f64 },
    #[error("{0}")]
    MissingColumn(String),
    #[error("{asset}: need at least {needed} observations, got {got}")]
    InsufficientData { asset: String, needed: usize, got: usize },
    #[error("only {survivors} asset(s) survive alignment; at least 2 are required")]
    TooFewAssets { survivors: usize },
    #[error("panel is empty")]
    EmptyPanel,
    #[error("malformed panel: {0}")]
    Panel(String),
}

/// Prices of one asset on strictly increasing dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub asset_id: String,
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    /// Builds a series from unordered rows: sorts by date and keeps the last
    /// row for each repeated date. Returns the series and the number of
    /// collapsed duplicates.
    pub fn from_rows(asset_id: impl Into<String>, rows: Vec<(NaiveDate, f64)>) -> (Self, usize) {
        let total = rows.len();
        let mut by_date = BTreeMap::new();
        for (d, p) in rows {
            by_date.insert(d, p);
        }
        let duplicates = total - by_date.len();
        let (dates, prices) = by_date.into_iter().unzip();
        (Self { asset_id: asset_id.into(), dates, prices }, duplicates)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSeries {
    pub series: PriceSeries,
    /// Rows dropped because a later row carried the same date.
    pub duplicates: usize,
}

/// Log returns of one asset, dated by the later of the two prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub asset_id: String,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
}

/// Time-aligned returns, one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub asset_ids: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// `T x n`, row `t` holds every asset's return on `dates[t]`.
    pub returns: Matrix,
}

impl ReturnPanel {
    pub fn new(asset_ids: Vec<String>, dates: Vec<NaiveDate>, returns: Matrix) -> Result<Self, DataError> {
        if returns.rows() != dates.len() || returns.cols() != asset_ids.len() {
            return Err(DataError::Panel(format!(
                "{} dates and {} assets for a {}x{} matrix",
                dates.len(),
                asset_ids.len(),
                returns.rows(),
                returns.cols()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DataError::Panel("dates are not strictly increasing".into()));
        }
        if returns.to_rows().iter().flatten().any(|v| !v.is_finite()) {
            return Err(DataError::Panel("non-finite return".into()));
        }
        Ok(Self { asset_ids, dates, returns })
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.asset_ids.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_obs()).map(|t| self.returns[(t, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_assets()).map(|j| self.column(j)).collect()
    }

    /// Writes `date,<asset>...` rows with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| DataError::Panel(e.to_string());
        let mut header = vec!["date".to_string()];
        header.extend(self.asset_ids.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (t, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format("%Y-%m-%d").to_string()];
            rec.extend(self.returns.row(t).iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| DataError::Panel(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = rdr.headers().map_err(|e| csv_error(&e))?.clone();
        if header.len() < 2 {
            return Err(DataError::MissingColumn("panel needs a date column and at least one asset".into()));
        }
        let asset_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(&e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let date = parse_date(&rec[0])
                .ok_or_else(|| DataError::Parse { line, message: format!("bad date {:?}", &rec[0]) })?;
            dates.push(date);
            for field in rec.iter().skip(1) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| DataError::Parse { line, message: format!("bad number {field:?}") })?;
                values.push(v);
            }
            if values.len() != dates.len() * asset_ids.len() {
                return Err(DataError::Parse { line, message: "wrong number of fields".into() });
            }
        }
        let t = dates.len();
        let n = asset_ids.len();
        let returns = Matrix::from_fn(t, n, |i, j| values[i * n + j]);
        Self::new(asset_ids, dates, returns)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
        Self::read_csv(file)
    }
}

fn io_error(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io { path: path.display().to_string(), source }
}

fn csv_error(e: &csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line());
    DataError::Parse { line, message: e.to_string() }
}

/// Parses `YYYY-MM-DD`, `YYYY/MM/DD`, `MM/DD/YYYY`, or a datetime whose first
/// ten characters are an ISO date.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    for fmt in ["%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return Some(d);
        }
    }
    if s.len() > 10 && s.is_char_boundary(10) {
        let rest = &s[10..];
        if rest.starts_with(['T', ' ']) {
            return NaiveDate::parse_from_str(&s[..10], "%Y-%m-%d").ok();
        }
    }
    None
}

/// Loads one asset's prices. The asset id is the file stem.
pub fn load_price_series(path: &Path) -> Result<LoadedSeries, DataError> {
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    let asset = path.file_stem().map_or_else(|| "asset".to_string(), |s| s.to_string_lossy().into_owned());
    parse_price_csv(file, &asset)
}

/// Parses a price CSV with a header row.
///
/// The timestamp is the first column whose first value parses as a date; the
/// price is the column named `price` or `close` (any case), otherwise the
/// first other column holding a number.
pub fn parse_price_csv<R: Read>(input: R, asset_id: &str) -> Result<LoadedSeries, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(input);
    let header = rdr.headers().map_err(|e| csv_error(&e))?.clone();
    let records: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().map_err(|e| csv_error(&e))?;
    let first = records
        .first()
        .ok_or_else(|| DataError::InsufficientData { asset: asset_id.into(), needed: 1, got: 0 })?;

    let date_col = (0..first.len())
        .find(|&j| parse_date(&first[j]).is_some())
        .ok_or_else(|| DataError::MissingColumn(format!("{asset_id}: no column holds a date")))?;
    let named = header.iter().position(|h| {
        let h = h.to_ascii_lowercase();
        h == "price" || h == "close"
    });
    let price_col = named
        .filter(|&j| j != date_col)
        .or_else(|| (0..first.len()).find(|&j| j != date_col && first[j].parse::<f64>().is_ok()))
        .ok_or_else(|| DataError::MissingColumn(format!("{asset_id}: no price column")))?;

    let mut rows = Vec::with_capacity(records.len());
    for rec in &records {
        let line = rec.position().map_or(0, |p| p.line());
        let field = |j: usize| {
            rec.get(j).ok_or_else(|| DataError::Parse { line, message: format!("missing field {}", j + 1) })
        };
        let raw_date = field(date_col)?;
        let date = parse_date(raw_date)
            .ok_or_else(|| DataError::Parse { line, message: format!("bad date {raw_date:?}") })?;
        let raw_price = field(price_col)?;
        let price: f64 = raw_price
            .parse()
            .map_err(|_| DataError::Parse { line, message: format!("bad price {raw_price:?}") })?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(DataError::NonPositivePrice { line, value: price });
        }
        rows.push((date, price));
    }
    let (series, duplicates) = PriceSeries::from_rows(asset_id, rows);
    if duplicates > 0 {
        log::warn!("{asset_id}: collapsed {duplicates} duplicate date(s) to their last occurrence");
    }
    Ok(LoadedSeries { series, duplicates })
}

/// `r_t = ln(P_t / P_{t-1})`.
pub fn log_returns(s: &PriceSeries) -> Result<ReturnSeries, DataError> {
    if s.len() < 2 {
        return Err(DataError::InsufficientData { asset: s.asset_id.clone(), needed: 2, got: s.len() });
    }
    let returns = s.prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    Ok(ReturnSeries { asset_id: s.asset_id.clone(), dates: s.dates[1..].to_vec(), returns })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPanel {
    pub panel: ReturnPanel,
    /// Assets excluded for having fewer than `min_obs` usable observations.
    pub dropped: Vec<String>,
}

/// Inner-joins return series on their dates.
///
/// Assets with fewer than `min_obs` own observations are dropped first. If
/// the common date set is still shorter than `min_obs`, the asset whose
/// removal enlarges it most is dropped, repeatedly.
pub fn align_panel(series: &[ReturnSeries], min_obs: usize) -> Result<AlignedPanel, DataError> {
    let mut dropped = Vec::new();
    let mut kept: Vec<&ReturnSeries> = Vec::new();
    for s in series {
        if s.returns.len() < min_obs {
            log::warn!("dropping {}: {} observations < {min_obs}", s.asset_id, s.returns.len());
            dropped.push(s.asset_id.clone());
        } else {
            kept.push(s);
        }
    }
    let common = |set: &[&ReturnSeries]| -> BTreeSet<NaiveDate> {
        let mut it = set.iter();
        let Some(first) = it.next() else { return BTreeSet::new() };
        let mut acc: BTreeSet<NaiveDate> = first.dates.iter().copied().collect();
        for s in it {
            let other: BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
            acc = acc.intersection(&other).copied().collect();
        }
        acc
    };
    let mut dates = common(&kept);
    while kept.len() >= 2 && dates.len() < min_obs {
        let (worst, best_dates) = (0..kept.len())
            .map(|i| {
                let rest: Vec<&ReturnSeries> =
                    kept.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, s)| *s).collect();
                (i, common(&rest))
            })
            .max_by_key(|(i, d)| (d.len(), std::cmp::Reverse(*i)))
            .expect("at least two assets");
        log::warn!("dropping {}: only {} common observations", kept[worst].asset_id, dates.len());
        dropped.push(kept.remove(worst).asset_id.clone());
        dates = best_dates;
    }
    if kept.len() < 2 || dates.len() < min_obs {
        return Err(DataError::TooFewAssets { survivors: if dates.len() < min_obs { 0 } else { kept.len() } });
    }

    let dates: Vec<NaiveDate> = dates.into_iter().collect();
    let mut returns = Matrix::zeros(dates.len(), kept.len());
    for (j, s) in kept.iter().enumerate() {
        let lookup: BTreeMap<NaiveDate, f64> = s.dates.iter().copied().zip(s.returns.iter().copied()).collect();
        for (t, d) in dates.iter().enumerate() {
            returns[(t, j)] = lookup[d];
        }
    }
    let ids = kept.iter().map(|s| s.asset_id.clone()).collect();
    Ok(AlignedPanel { panel: ReturnPanel::new(ids, dates, returns)?, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSummary {
    pub asset_id: String,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub assets: Vec<AssetSummary>,
    /// Pearson correlations; `None` where a column has zero variance.
    pub correlation: Vec<Vec<Option<f64>>>,
}

/// Per-column mean, sample standard deviation (T-1), min and max, plus the
/// Pearson correlation matrix.
pub fn summarize(panel: &ReturnPanel) -> Result<SummaryStats, DataError> {
    if panel.n_obs() == 0 || panel.n_assets() == 0 {
        return Err(DataError::EmptyPanel);
    }
    let cols = panel.columns();
    let assets = cols
        .iter()
        .zip(&panel.asset_ids)
        .map(|(c, id)| {
            let m = mean(c);
            AssetSummary {
                asset_id: id.clone(),
                mean: m,
                std_dev: sample_std(c, m),
                min: c.iter().copied().fold(f64::INFINITY, f64::min),
                max: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    let n = cols.len();
    let correlation = (0..n)
        .map(|i| (0..n).map(|j| pearson(&cols[i], &cols[j])).collect())
        .collect();
    Ok(SummaryStats { assets, correlation })
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with denominator `len - 1`; 0 for one point.
pub fn sample_std(x: &[f64], mean: f64) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Pearson correlation, `None` when either series is constant. Identical
/// inputs return exactly 1.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    if x == y {
        return Some(1.0);
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
