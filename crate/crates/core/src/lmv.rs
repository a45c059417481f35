//! Local maximum volatility: for each volume bin `u_j`, the largest
//! volatility among days whose (possibly lagged) volume fell in that bin,
//! with correlation and linear-fit reporting across bins and lags.

use chrono::NaiveDate;
use serde::Serialize;

use crate::distributions::Binning;
use crate::normalize::NormalizedSeries;
use crate::stats;
use crate::{Error, Result};

/// Per-volume-bin maximum volatility at one lag.
#[derive(Debug, Clone, Serialize)]
pub struct LmvCurve {
    pub lag: usize,
    pub bins: Binning,
    pub bin_centers: Vec<f64>,
    /// Max volatility per bin; meaningful only where `occupied`.
    pub lmv: Vec<f64>,
    /// Date of each maximizer (earliest date on ties).
    pub lmv_dates: Vec<Option<NaiveDate>>,
    pub occupied: Vec<bool>,
}

impl LmvCurve {
    /// (center, lmv, date) for occupied bins only.
    pub fn occupied_points(&self) -> Vec<(f64, f64, NaiveDate)> {
        (0..self.bins.n_bins)
            .filter(|&j| self.occupied[j])
            .map(|j| (self.bin_centers[j], self.lmv[j], self.lmv_dates[j].unwrap()))
            .collect()
    }
}

/// Correlations between volume and volatility, raw and through the LMV
/// envelope, plus the least-squares line of LMV on the bin center.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrelationReport {
    pub rho_raw: f64,
    pub rho_lmv: f64,
    pub fit_slope: f64,
    pub fit_intercept: f64,
    pub n_pairs: usize,
    pub n_bins: usize,
}

/// Cross-ticker mean and standard deviation of both correlations at one lag.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LagProfileEntry {
    pub lag: usize,
    pub mean_rho_raw: f64,
    pub std_rho_raw: f64,
    pub mean_rho_lmv: f64,
    pub std_rho_lmv: f64,
    pub n_tickers: usize,
}

/// Compute the LMV curve of one series: `lmv_j = max{ g(t) : v(t-lag) ∈ u_j }`.
pub fn compute_lmv(series: &NormalizedSeries, bins: &Binning, lag: usize) -> Result<LmvCurve> {
    if series.len() <= lag {
        return Err(Error::InsufficientData(format!(
            "{}: series of length {} cannot support lag {}",
            series.ticker,
            series.len(),
            lag
        )));
    }
    let mut lmv = vec![f64::NEG_INFINITY; bins.n_bins];
    let mut dates: Vec<Option<NaiveDate>> = vec![None; bins.n_bins];
    let mut occupied = vec![false; bins.n_bins];
    for t in lag..series.len() {
        if let Some(j) = bins.index(series.v[t - lag]) {
            let g = series.g[t];
            // Strict > keeps the earliest maximizer date on ties.
            if !occupied[j] || g > lmv[j] {
                lmv[j] = g;
                dates[j] = Some(series.dates[t]);
                occupied[j] = true;
            }
        }
    }
    if !occupied.iter().any(|&o| o) {
        return Err(Error::NoDataInVolumeRange { lo: bins.lo, hi: bins.hi });
    }
    Ok(LmvCurve {
        lag,
        bins: *bins,
        bin_centers: (0..bins.n_bins).map(|j| bins.center(j)).collect(),
        lmv,
        lmv_dates: dates,
        occupied,
    })
}

/// Correlation report for one curve and the raw `(v(t-lag), g(t))` pairs it
/// was built from.
pub fn lmv_correlation(curve: &LmvCurve, pairs: &[(f64, f64)]) -> Result<CorrelationReport> {
    let points = curve.occupied_points();
    if points.len() < 3 {
        return Err(Error::InsufficientLmvPoints { occupied: points.len() });
    }
    if pairs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need >= 3 raw pairs, got {}",
            pairs.len()
        )));
    }
    let centers: Vec<f64> = points.iter().map(|p| p.0).collect();
    let maxima: Vec<f64> = points.iter().map(|p| p.1).collect();
    let vs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let gs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let rho_lmv = stats::pearson(&centers, &maxima)?;
    let rho_raw = stats::pearson(&vs, &gs)?;
    let (fit_slope, fit_intercept) = stats::ols_line(&centers, &maxima)?;
    Ok(CorrelationReport {
        rho_raw,
        rho_lmv,
        fit_slope,
        fit_intercept,
        n_pairs: pairs.len(),
        n_bins: points.len(),
    })
}

/// Per-lag cross-ticker mean/std of both correlations. Tickers that fail at
/// a given lag (too short, too few occupied bins) are skipped and listed.
pub fn lag_correlation_profile(
    universe: &[NormalizedSeries],
    max_lag: usize,
    bins: &Binning,
) -> Result<(Vec<LagProfileEntry>, Vec<(usize, String)>)> {
    let mut profile = Vec::with_capacity(max_lag + 1);
    let mut skipped = Vec::new();
    for lag in 0..=max_lag {
        let mut raws = Vec::new();
        let mut lmvs = Vec::new();
        for series in universe {
            let report = compute_lmv(series, bins, lag)
                .and_then(|curve| lmv_correlation(&curve, &series.lagged_pairs(lag)));
            match report {
                Ok(r) => {
                    raws.push(r.rho_raw);
                    lmvs.push(r.rho_lmv);
                }
                Err(_) => skipped.push((lag, series.ticker.clone())),
            }
        }
        if raws.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no ticker usable at lag {lag}"
            )));
        }
        profile.push(LagProfileEntry {
            lag,
            mean_rho_raw: stats::mean(&raws),
            std_rho_raw: stats::std_pop(&raws),
            mean_rho_lmv: stats::mean(&lmvs),
            std_rho_lmv: stats::std_pop(&lmvs),
            n_tickers: raws.len(),
        });
    }
    Ok((profile, skipped))
}
