//! Parsing and validation of per-ticker daily CSV files.
//!
//! Input format, one file per ticker named `<TICKER>.csv`:
//!
//! ```text
//! date,close,volume
//! 2020-01-02,100.0,1000
//! ```
//!
//! Zero-volume rows are dropped (the pipeline needs `ln Q`), malformed rows
//! are dropped, out-of-order rows are sorted. Every drop is counted in the
//! [`ValidationReport`].

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::{Error, Result};

/// One trading day of one ticker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DailyBar {
    pub date: NaiveDate,
    /// Closing price, strictly positive.
    pub close: f64,
    /// Shares traded. Zero-volume bars never survive parsing.
    pub volume: u64,
}

/// Ordered daily bars for one ticker. Dates are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StockSeries {
    pub ticker: String,
    pub bars: Vec<DailyBar>,
}

/// Per-file parse accounting. `rows_read` covers every data row seen,
/// retained or not.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ticker: String,
    pub rows_read: usize,
    pub rows_dropped_zero_volume: usize,
    pub rows_dropped_malformed: usize,
    /// Consecutive retained bars more than one calendar day apart.
    pub date_gaps: usize,
}

impl StockSeries {
    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    /// Render the series back into the input CSV format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,close,volume\n");
        for bar in &self.bars {
            let _ = writeln!(out, "{},{},{}", bar.date.format("%Y-%m-%d"), bar.close, bar.volume);
        }
        out
    }
}

fn parse_row(line: &str) -> Option<(NaiveDate, f64, u64)> {
    let mut fields = line.split(',');
    let date = fields.next()?.trim();
    let close = fields.next()?.trim();
    let volume = fields.next()?.trim();
    if fields.next().is_some() {
        return None;
    }
    let date = NaiveDate::parse_from_str(date, "%Y-%m-%d").ok()?;
    // Plain decimal only; thousands separators are malformed.
    if close.contains('_') || volume.contains('_') {
        return None;
    }
    let close: f64 = close.parse().ok()?;
    let volume: u64 = volume.parse().ok()?;
    if !close.is_finite() || close <= 0.0 {
        return None;
    }
    Some((date, close, volume))
}

/// Parse one ticker file into a validated series plus its report.
pub fn parse_daily_series(path: &Path, ticker: &str) -> Result<(StockSeries, ValidationReport)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_daily_series_str(&text, ticker)
}

/// Same as [`parse_daily_series`] but over in-memory bytes.
pub fn parse_daily_series_str(text: &str, ticker: &str) -> Result<(StockSeries, ValidationReport)> {
    let mut report = ValidationReport {
        ticker: ticker.to_string(),
        ..ValidationReport::default()
    };
    let mut bars = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if i == 0 {
            // Header is required but its exact spelling is not enforced
            // beyond the three expected column names.
            continue;
        }
        if line.is_empty() {
            continue;
        }
        report.rows_read += 1;
        match parse_row(line) {
            Some((date, close, volume)) => {
                if volume == 0 {
                    report.rows_dropped_zero_volume += 1;
                } else {
                    bars.push(DailyBar { date, close, volume });
                }
            }
            None => report.rows_dropped_malformed += 1,
        }
    }
    bars.sort_by_key(|b| b.date);
    for pair in bars.windows(2) {
        if pair[0].date == pair[1].date {
            return Err(Error::DuplicateDate {
                ticker: ticker.to_string(),
                date: pair[0].date,
            });
        }
        if (pair[1].date - pair[0].date).num_days() > 1 {
            report.date_gaps += 1;
        }
    }
    if bars.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{ticker}: {} valid rows after filtering, need at least 2",
            bars.len()
        )));
    }
    Ok((
        StockSeries {
            ticker: ticker.to_string(),
            bars,
        },
        report,
    ))
}

/// Load every `*.csv` in a directory, one series per file, ordered
/// lexicographically by ticker (the file stem).
pub fn load_universe(dir: &Path) -> Result<(Vec<StockSeries>, Vec<ValidationReport>)> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files: Vec<(String, std::path::PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("csv") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.push((stem.to_string(), path));
            }
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    if files.is_empty() {
        return Err(Error::NoInputSeries(dir.display().to_string()));
    }
    let mut universe = Vec::with_capacity(files.len());
    let mut reports = Vec::with_capacity(files.len());
    for (ticker, path) in files {
        let (series, report) = parse_daily_series(&path, &ticker)?;
        universe.push(series);
        reports.push(report);
    }
    Ok((universe, reports))
}
