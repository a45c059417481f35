//! Normalized volatility `g(t)` and detrended, standardized log-volume
//! `v(t)`.
//!
//! For each ticker: returns are log price changes over consecutive retained
//! bars; log-volume is detrended by an ordinary least-squares line in the
//! row index over the full sample; both are standardized with population
//! moments. `g(t)` is the absolute standardized return, so `g ≥ 0` and `v`
//! has mean 0 and standard deviation 1 by construction.
//!
//! Alignment: the first bar contributes no return, so its volume entry is
//! dropped and every `(g(t), v(t))` pair is same-day.

use chrono::NaiveDate;
use serde::Serialize;

use crate::ingest::StockSeries;
use crate::stats;
use crate::{Error, Result};

/// Least-squares line removed from log-volume.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DetrendFit {
    pub intercept: f64,
    /// Per-row slope (the fit is over the integer row index, not calendar
    /// days; gaps are market closures).
    pub slope: f64,
    pub n: usize,
}

/// Moments used for standardization (population form).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalizationStats {
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_logvol: f64,
    pub std_logvol: f64,
}

/// One ticker's aligned `(g, v)` history.
#[derive(Debug, Clone, Serialize)]
pub struct NormalizedSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    /// Normalized volatility, all entries >= 0.
    pub g: Vec<f64>,
    /// Normalized detrended log-volume, mean 0 / std 1.
    pub v: Vec<f64>,
    pub stats: NormalizationStats,
    pub detrend: DetrendFit,
    /// True when produced by the synthetic generator rather than real data.
    pub synthetic: bool,
}

impl NormalizedSeries {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Same-day `(v, g)` pairs, optionally pairing `v(t - lag)` with `g(t)`.
    pub fn lagged_pairs(&self, lag: usize) -> Vec<(f64, f64)> {
        (lag..self.len()).map(|t| (self.v[t - lag], self.g[t])).collect()
    }
}

/// Log returns over consecutive retained bars: `ln p(t) − ln p(t−1)`.
pub fn log_returns(series: &StockSeries) -> Result<Vec<f64>> {
    if series.bars.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: need at least 2 bars for returns",
            series.ticker
        )));
    }
    series
        .bars
        .windows(2)
        .map(|w| {
            if w[0].close <= 0.0 || w[1].close <= 0.0 {
                Err(Error::InvalidPrice(format!(
                    "{}: non-positive close at {}",
                    series.ticker, w[1].date
                )))
            } else {
                Ok(w[1].close.ln() - w[0].close.ln())
            }
        })
        .collect()
}

/// Least-squares detrend of `ln Q(t)` against the row index. Returns the
/// residuals and the fitted line.
pub fn detrend_log_volume(series: &StockSeries) -> Result<(Vec<f64>, DetrendFit)> {
    let n = series.bars.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: need at least 2 bars to detrend",
            series.ticker
        )));
    }
    let log_q: Vec<f64> = series.bars.iter().map(|b| (b.volume as f64).ln()).collect();
    let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let (slope, intercept) = stats::ols_line(&t, &log_q)?;
    let residuals = log_q
        .iter()
        .enumerate()
        .map(|(i, q)| q - (intercept + slope * i as f64))
        .collect();
    Ok((residuals, DetrendFit { intercept, slope, n }))
}

/// Full normalization of one series into aligned `(g, v)`.
pub fn normalize_series(series: &StockSeries) -> Result<NormalizedSeries> {
    let returns = log_returns(series)?;
    let (residuals, detrend) = detrend_log_volume(series)?;

    let mean_return = stats::mean(&returns);
    let std_return = stats::std_pop(&returns);
    if std_return == 0.0 {
        return Err(Error::DegenerateSeries(format!(
            "{}: constant returns",
            series.ticker
        )));
    }
    // Drop the first volume observation so (g, v) pairs are same-day, then
    // standardize over the aligned subset; mean(v)=0 and std(v)=1 exactly.
    let aligned_residuals = &residuals[1..];
    let mean_logvol = stats::mean(aligned_residuals);
    let std_logvol = stats::std_pop(aligned_residuals);
    if std_logvol == 0.0 {
        return Err(Error::DegenerateSeries(format!(
            "{}: constant detrended log-volume",
            series.ticker
        )));
    }

    let g = returns.iter().map(|r| ((r - mean_return) / std_return).abs()).collect();
    let v = aligned_residuals.iter().map(|q| (q - mean_logvol) / std_logvol).collect();
    let dates = series.bars[1..].iter().map(|b| b.date).collect();

    Ok(NormalizedSeries {
        ticker: series.ticker.clone(),
        dates,
        g,
        v,
        stats: NormalizationStats {
            mean_return,
            std_return,
            mean_logvol,
            std_logvol,
        },
        detrend,
        synthetic: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DailyBar;
    use chrono::NaiveDate;

    fn series(prices: &[f64], volumes: &[u64]) -> StockSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let bars = prices
            .iter()
            .zip(volumes)
            .enumerate()
            .map(|(i, (&close, &volume))| DailyBar {
                date: start + chrono::Days::new(i as u64),
                close,
                volume,
            })
            .collect();
        StockSeries { ticker: "T".into(), bars }
    }

    #[test]
    fn constant_price_has_zero_returns() {
        let s = series(&[5.0, 5.0, 5.0], &[10, 20, 30]);
        assert_eq!(log_returns(&s).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn exact_log_prices() {
        let e = std::f64::consts::E;
        let s = series(&[1.0, e, e * e], &[10, 20, 30]);
        let r = log_returns(&s).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!((r[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_return_closed_form() {
        let s = series(&[100.0, 110.0], &[10, 20]);
        let r = log_returns(&s).unwrap();
        assert!((r[0] - 1.1f64.ln()).abs() < 1e-12);
        assert!((r[0] - 0.0953102).abs() < 1e-7);
    }

    #[test]
    fn constant_volume_detrends_to_zero() {
        let c = 3.0f64;
        let q = c.exp().round() as u64; // ~e^3
        let s = series(&[1.0, 2.0, 3.0], &[q, q, q]);
        let (res, fit) = detrend_log_volume(&s).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!((fit.intercept - (q as f64).ln()).abs() < 1e-12);
        assert!(res.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn exact_exponential_trend_has_zero_residuals() {
        // ln Q = 2 + 0.5 t exactly (up to u64 rounding kept tiny by scale)
        let volumes: Vec<u64> = (0..6).map(|t| ((2.0 + 0.5 * t as f64).exp() * 1e6).round() as u64).collect();
        let prices: Vec<f64> = (0..6).map(|t| 10.0 + t as f64).collect();
        let s = series(&prices, &volumes);
        let (res, fit) = detrend_log_volume(&s).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-6);
        assert!(res.iter().all(|r| r.abs() < 1e-6));
    }

    #[test]
    fn detrend_three_point_closed_form() {
        // ln Q = [1, 3, 2] -> slope 0.5, intercept 1.5, residuals [-0.5, 1, -0.5]
        let volumes: Vec<u64> = [1.0f64, 3.0, 2.0]
            .iter()
            .map(|&lq| ((lq + 10.0).exp()).round() as u64)
            .collect();
        // Shift by 10 in log space to keep u64 rounding negligible; the
        // shift moves the intercept, not slope or residuals.
        let s = series(&[1.0, 2.0, 3.0], &volumes);
        let (res, fit) = detrend_log_volume(&s).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-5);
        assert!((fit.intercept - 11.5).abs() < 1e-5);
        let expected = [-0.5, 1.0, -0.5];
        for (r, e) in res.iter().zip(expected) {
            assert!((r - e).abs() < 1e-5);
        }
    }

    #[test]
    fn residuals_sum_to_zero() {
        let volumes: Vec<u64> = (0..50).map(|t| 1000 + 37 * t * t + 11 * t).collect();
        let prices: Vec<f64> = (0..50).map(|t| 50.0 + (t as f64).sin()).collect();
        let s = series(&prices, &volumes);
        let (res, _) = detrend_log_volume(&s).unwrap();
        assert!(res.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn normalized_series_invariants() {
        let prices: Vec<f64> = (0..200).map(|t| 100.0 * (1.0 + 0.01 * (t as f64 * 0.9).sin())).collect();
        let volumes: Vec<u64> = (0..200).map(|t| (1e6 * (1.0 + 0.5 * (t as f64 * 0.7).cos())) as u64).collect();
        let s = series(&prices, &volumes);
        let ns = normalize_series(&s).unwrap();
        assert_eq!(ns.g.len(), 199);
        assert_eq!(ns.v.len(), 199);
        assert_eq!(ns.dates.len(), 199);
        assert!(ns.g.iter().all(|&g| g >= 0.0));
        assert!(stats::mean(&ns.v).abs() < 1e-9);
        assert!((stats::std_pop(&ns.v) - 1.0).abs() < 1e-9);
        assert!(!ns.synthetic);
    }

    #[test]
    fn symmetric_returns_give_unit_g() {
        // returns [1, -1]: mean 0, population std 1 -> g = [1, 1]
        let e = std::f64::consts::E;
        let s = series(&[1.0, e, 1.0], &[100, 200, 400]);
        let ns = normalize_series(&s).unwrap();
        assert!((ns.g[0] - 1.0).abs() < 1e-12);
        assert!((ns.g[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_price_is_degenerate() {
        let s = series(&[5.0, 5.0, 5.0], &[10, 20, 30]);
        assert!(matches!(normalize_series(&s), Err(Error::DegenerateSeries(_))));
    }

    #[test]
    fn scale_invariance() {
        let prices: Vec<f64> = (0..100).map(|t| 100.0 + (t as f64 * 1.3).sin() * 7.0).collect();
        let volumes: Vec<u64> = (0..100).map(|t| 1_000_000 + 31_337 * t).collect();
        let base = normalize_series(&series(&prices, &volumes)).unwrap();
        let scaled_prices: Vec<f64> = prices.iter().map(|p| p * 42.0).collect();
        let scaled_volumes: Vec<u64> = volumes.iter().map(|q| q * 8).collect();
        let scaled = normalize_series(&series(&scaled_prices, &scaled_volumes)).unwrap();
        for (a, b) in base.g.iter().zip(&scaled.g) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in base.v.iter().zip(&scaled.v) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
