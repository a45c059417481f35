//! Quintile-conditioned analysis of the days preceding extreme volatility,
//! and the next-day volatility regression uplift from adding volume.
//!
//! Extreme sets, quintiles and regressions are per ticker; the 5-vector
//! statistics average per-ticker distributions, while the 5x5 joint grid
//! pools events across tickers. The last day of each series has no next
//! day and is excluded from eligibility.

use chrono::NaiveDate;
use serde::Serialize;

use crate::normalize::NormalizedSeries;
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Top,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditioner {
    Volume,
    Volatility,
}

/// Whether joint-grid quintile boundaries are computed per ticker or from
/// the pooled universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuintileMode {
    PerStock,
    Pooled,
}

impl std::str::FromStr for QuintileMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "per-stock" => Ok(QuintileMode::PerStock),
            "pooled" => Ok(QuintileMode::Pooled),
            other => Err(format!("unknown quintile mode '{other}'")),
        }
    }
}

/// The top (or bottom) `fraction` of one ticker's days by volatility.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremeDaySet {
    pub ticker: String,
    pub side: Side,
    pub fraction: f64,
    /// Indices into the normalized series, ascending.
    pub indices: Vec<usize>,
    pub dates: Vec<NaiveDate>,
    /// Volatility of the least extreme member.
    pub threshold: f64,
}

/// Rank-based quintile labels (1..=5) aligned to the input order.
#[derive(Debug, Clone, Serialize)]
pub struct QuintileAssignment {
    pub labels: Vec<u8>,
    /// Value at the lower edge of quintiles 2..=5.
    pub boundaries: [f64; 4],
}

/// 5x5 grid of relative next-day-extreme probabilities, indexed
/// `[volume quintile - 1][volatility quintile - 1]`. Cells with no
/// occupants are NaN and listed in `undefined_cells`.
#[derive(Debug, Clone, Serialize)]
pub struct QuintileGrid {
    pub side: Side,
    pub cells: [[f64; 5]; 5],
    pub cell_counts: [[usize; 5]; 5],
    /// Pooled unconditioned probability that a day precedes an extreme day.
    pub uncond_fraction: f64,
    pub total_eligible: usize,
    pub total_extreme_preceded: usize,
    pub undefined_cells: Vec<(u8, u8)>,
}

/// Per-ticker preceding-quintile distributions with their cross-ticker
/// mean and standard deviation.
#[derive(Debug, Clone, Serialize)]
pub struct QuintileVector {
    pub conditioner: Conditioner,
    pub side: Side,
    pub mean: [f64; 5],
    pub std: [f64; 5],
    pub per_ticker: Vec<(String, [f64; 5])>,
    pub skipped: Vec<String>,
}

/// Per-ticker R² of next-day volatility on `g(t)` alone and on
/// `(g(t), v(t))`.
#[derive(Debug, Clone, Serialize)]
pub struct TickerR2 {
    pub ticker: String,
    pub r2_g_only: f64,
    pub r2_g_and_v: f64,
    pub uplift_abs: f64,
    /// Relative uplift `(r2_g_and_v - r2_g_only) / r2_g_only`.
    pub uplift_rel: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionReport {
    pub per_ticker: Vec<TickerR2>,
    pub mean_uplift_rel: f64,
    pub mean_uplift_abs: f64,
    pub skipped: Vec<String>,
}

/// The `round(fraction * n)` most (or least) volatile days of one series.
/// Ties at the threshold resolve to the earlier date.
pub fn extreme_day_set(series: &NormalizedSeries, fraction: f64, side: Side) -> Result<ExtremeDaySet> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "extreme fraction must be in (0, 0.5], got {fraction}"
        )));
    }
    let n = series.len();
    if (n as f64) * fraction < 1.0 {
        return Err(Error::InsufficientDataForFraction { fraction, n });
    }
    let k = ((n as f64) * fraction).round() as usize;
    let k = k.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    match side {
        Side::Top => order.sort_by(|&i, &j| series.g[j].total_cmp(&series.g[i]).then(i.cmp(&j))),
        Side::Bottom => order.sort_by(|&i, &j| series.g[i].total_cmp(&series.g[j]).then(i.cmp(&j))),
    }
    let mut indices: Vec<usize> = order[..k].to_vec();
    let threshold = series.g[indices[k - 1]];
    indices.sort_unstable();
    let dates = indices.iter().map(|&i| series.dates[i]).collect();
    Ok(ExtremeDaySet {
        ticker: series.ticker.clone(),
        side,
        fraction,
        indices,
        dates,
        threshold,
    })
}

/// Rank-based quintile assignment. Sorted by (value, position), split into
/// five contiguous groups; remainders go to the lower quintiles first.
pub fn quintile_assign(values: &[f64]) -> Result<QuintileAssignment> {
    let n = values.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "quintile assignment needs n >= 5, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let base = n / 5;
    let rem = n % 5;
    let mut labels = vec![0u8; n];
    let mut boundaries = [0.0; 4];
    let mut pos = 0usize;
    for q in 0..5 {
        let size = base + usize::from(q < rem);
        if q > 0 {
            boundaries[q - 1] = values[order[pos]];
        }
        for &idx in &order[pos..pos + size] {
            labels[idx] = (q + 1) as u8;
        }
        pos += size;
    }
    Ok(QuintileAssignment { labels, boundaries })
}

/// Eligible-day view of a series: everything except the last day.
fn eligible<'a>(series: &'a NormalizedSeries) -> (&'a [f64], &'a [f64], usize) {
    let m = series.len() - 1;
    (&series.g[..m], &series.v[..m], m)
}

/// Distribution over the quintile of `v(t)` (or `g(t)`) among days `t`
/// whose next day lands in the extreme set; per ticker, then averaged.
pub fn preceding_quintile_distribution(
    universe: &[NormalizedSeries],
    conditioner: Conditioner,
    side: Side,
    fraction: f64,
) -> Result<QuintileVector> {
    if universe.is_empty() {
        return Err(Error::InsufficientData("empty universe".into()));
    }
    let mut per_ticker = Vec::new();
    let mut skipped = Vec::new();
    for series in universe {
        match ticker_quintile_vector(series, conditioner, side, fraction) {
            Ok(vec5) => per_ticker.push((series.ticker.clone(), vec5)),
            Err(_) => skipped.push(series.ticker.clone()),
        }
    }
    if per_ticker.is_empty() {
        return Err(Error::InsufficientData(
            "no ticker produced a preceding-quintile distribution".into(),
        ));
    }
    let mut mean = [0.0; 5];
    let mut std = [0.0; 5];
    for q in 0..5 {
        let column: Vec<f64> = per_ticker.iter().map(|(_, p)| p[q]).collect();
        mean[q] = stats::mean(&column);
        std[q] = stats::std_pop(&column);
    }
    Ok(QuintileVector { conditioner, side, mean, std, per_ticker, skipped })
}

fn ticker_quintile_vector(
    series: &NormalizedSeries,
    conditioner: Conditioner,
    side: Side,
    fraction: f64,
) -> Result<[f64; 5]> {
    let extremes = extreme_day_set(series, fraction, side)?;
    let (g, v, m) = eligible(series);
    let values = match conditioner {
        Conditioner::Volume => v,
        Conditioner::Volatility => g,
    };
    let assignment = quintile_assign(values)?;
    let mut is_extreme = vec![false; series.len()];
    for &i in &extremes.indices {
        is_extreme[i] = true;
    }
    let mut counts = [0usize; 5];
    let mut total = 0usize;
    for t in 0..m {
        if is_extreme[t + 1] {
            counts[(assignment.labels[t] - 1) as usize] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::InsufficientData(format!(
            "{}: no eligible day precedes an extreme day",
            series.ticker
        )));
    }
    let mut probs = [0.0; 5];
    for q in 0..5 {
        probs[q] = counts[q] as f64 / total as f64;
    }
    Ok(probs)
}

/// Pooled 5x5 grid: relative probability that a day in joint quintile cell
/// `(n_v, n_g)` precedes an extreme day, in units of the pooled
/// unconditioned probability.
pub fn joint_quintile_grid(
    universe: &[NormalizedSeries],
    side: Side,
    fraction: f64,
    mode: QuintileMode,
) -> Result<QuintileGrid> {
    let mut cell_counts = [[0usize; 5]; 5];
    let mut cell_hits = [[0usize; 5]; 5];
    let mut total_eligible = 0usize;
    let mut total_hits = 0usize;
    let mut pooled_extremes = 0usize;
    // Pooled boundaries rank every eligible day of the universe together.
    let pooled_labels = match mode {
        QuintileMode::PerStock => None,
        QuintileMode::Pooled => {
            let mut all_v = Vec::new();
            let mut all_g = Vec::new();
            for series in universe {
                let (g, v, _) = eligible(series);
                all_v.extend_from_slice(v);
                all_g.extend_from_slice(g);
            }
            Some((quintile_assign(&all_v)?, quintile_assign(&all_g)?))
        }
    };
    let mut cursor = 0usize;
    for series in universe {
        let extremes = extreme_day_set(series, fraction, side)?;
        pooled_extremes += extremes.indices.len();
        let (g, v, m) = eligible(series);
        let (qv, qg) = match (&pooled_labels, mode) {
            (Some((qv, qg)), _) => (
                qv.labels[cursor..cursor + m].to_vec(),
                qg.labels[cursor..cursor + m].to_vec(),
            ),
            (None, _) => (quintile_assign(v)?.labels, quintile_assign(g)?.labels),
        };
        cursor += m;
        let mut is_extreme = vec![false; series.len()];
        for &i in &extremes.indices {
            is_extreme[i] = true;
        }
        for t in 0..m {
            let cv = (qv[t] - 1) as usize;
            let cg = (qg[t] - 1) as usize;
            cell_counts[cv][cg] += 1;
            total_eligible += 1;
            if is_extreme[t + 1] {
                cell_hits[cv][cg] += 1;
                total_hits += 1;
            }
        }
    }
    if pooled_extremes < 100 {
        return Err(Error::InsufficientData(format!(
            "pooled extreme-day count {pooled_extremes} < 100"
        )));
    }
    let uncond = total_hits as f64 / total_eligible as f64;
    let mut cells = [[f64::NAN; 5]; 5];
    let mut undefined = Vec::new();
    for cv in 0..5 {
        for cg in 0..5 {
            if cell_counts[cv][cg] == 0 || uncond == 0.0 {
                undefined.push(((cv + 1) as u8, (cg + 1) as u8));
            } else {
                cells[cv][cg] =
                    (cell_hits[cv][cg] as f64 / cell_counts[cv][cg] as f64) / uncond;
            }
        }
    }
    Ok(QuintileGrid {
        side,
        cells,
        cell_counts,
        uncond_fraction: uncond,
        total_eligible,
        total_extreme_preceded: total_hits,
        undefined_cells: undefined,
    })
}

/// Per-ticker R² of `g(t+1)` on `[1, g(t)]` versus `[1, g(t), v(t)]`.
pub fn regression_r2_uplift(universe: &[NormalizedSeries]) -> Result<RegressionReport> {
    let mut per_ticker = Vec::new();
    let mut skipped = Vec::new();
    for series in universe {
        if series.len() < 30 {
            skipped.push(series.ticker.clone());
            continue;
        }
        let n = series.len();
        let y = &series.g[1..];
        let x_g = &series.g[..n - 1];
        let x_v = &series.v[..n - 1];
        let fit = stats::r2_single(x_g, y).and_then(|r2_1| {
            stats::r2_two(x_g, x_v, y).map(|r2_2| (r2_1, r2_2))
        });
        match fit {
            Ok((r2_1, r2_2)) => {
                let uplift_abs = r2_2 - r2_1;
                let uplift_rel = if r2_1 > 0.0 { uplift_abs / r2_1 } else { 0.0 };
                per_ticker.push(TickerR2 {
                    ticker: series.ticker.clone(),
                    r2_g_only: r2_1,
                    r2_g_and_v: r2_2,
                    uplift_abs,
                    uplift_rel,
                });
            }
            Err(_) => skipped.push(series.ticker.clone()),
        }
    }
    if per_ticker.is_empty() {
        return Err(Error::InsufficientData("no ticker admits the regression".into()));
    }
    let rels: Vec<f64> = per_ticker.iter().map(|t| t.uplift_rel).collect();
    let abss: Vec<f64> = per_ticker.iter().map(|t| t.uplift_abs).collect();
    Ok(RegressionReport {
        mean_uplift_rel: stats::mean(&rels),
        mean_uplift_abs: stats::mean(&abss),
        per_ticker,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::{DetrendFit, NormalizationStats};

    fn series(v: Vec<f64>, g: Vec<f64>) -> NormalizedSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates = (0..g.len()).map(|i| start + chrono::Days::new(i as u64)).collect();
        NormalizedSeries {
            ticker: "SYN".into(),
            dates,
            g,
            v,
            stats: NormalizationStats {
                mean_return: 0.0,
                std_return: 1.0,
                mean_logvol: 0.0,
                std_logvol: 1.0,
            },
            detrend: DetrendFit { intercept: 0.0, slope: 0.0, n: 0 },
            synthetic: true,
        }
    }

    #[test]
    fn top_extremes_of_monotone_series() {
        let n = 1000;
        let g: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let v = vec![0.0; n];
        let s = series(v, g);
        let set = extreme_day_set(&s, 0.01, Side::Top).unwrap();
        assert_eq!(set.indices, (990..1000).collect::<Vec<_>>());
        assert_eq!(set.threshold, 990.0);
    }

    #[test]
    fn bottom_extremes() {
        let g: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let s = series(vec![0.0; 200], g);
        let set = extreme_day_set(&s, 0.05, Side::Bottom).unwrap();
        assert_eq!(set.indices, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn extreme_ties_prefer_earlier_dates() {
        let g = vec![1.0, 5.0, 5.0, 5.0, 0.5, 0.1, 0.2, 0.3, 0.4, 0.6];
        let s = series(vec![0.0; 10], g);
        let set = extreme_day_set(&s, 0.2, Side::Top).unwrap();
        assert_eq!(set.indices, vec![1, 2]);
    }

    #[test]
    fn too_short_for_fraction() {
        let g: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let s = series(vec![0.0; 50], g);
        assert!(matches!(
            extreme_day_set(&s, 0.01, Side::Top),
            Err(Error::InsufficientDataForFraction { .. })
        ));
    }

    #[test]
    fn quintiles_of_one_to_ten() {
        let values: Vec<f64> = (1..=10).map(f64::from).collect();
        let q = quintile_assign(&values).unwrap();
        assert_eq!(q.labels, vec![1, 1, 2, 2, 3, 3, 4, 4, 5, 5]);
    }

    #[test]
    fn equal_values_split_by_position() {
        let values = vec![7.0; 12];
        let q = quintile_assign(&values).unwrap();
        let mut sizes = [0usize; 5];
        for &l in &q.labels {
            sizes[(l - 1) as usize] += 1;
        }
        // n=12: remainders to the lower quintiles first.
        assert_eq!(sizes, [3, 3, 2, 2, 2]);
        // Position-stable: earlier entries get the lower labels.
        assert!(q.labels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn quintile_needs_five() {
        assert!(quintile_assign(&[1.0, 2.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn quintile_rank_invariance() {
        let values: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let transformed: Vec<f64> = values.iter().map(|x| (x * 0.1).exp()).collect();
        let a = quintile_assign(&values).unwrap();
        let b = quintile_assign(&transformed).unwrap();
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn per_ticker_distribution_sums_to_one() {
        let n = 600;
        let v: Vec<f64> = (0..n).map(|i| ((i * 29) % 601) as f64 / 100.0 - 3.0).collect();
        let g: Vec<f64> = (0..n).map(|i| ((i * 53) % 601) as f64 / 150.0).collect();
        let s = series(v, g);
        let vec5 = ticker_quintile_vector(&s, Conditioner::Volume, Side::Top, 0.02).unwrap();
        assert!((vec5.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_autocorrelation_gives_unit_r2_zero_uplift() {
        let n = 200;
        // g(t+1) = g(t) + 0.01 exactly, so yesterday's g predicts today's.
        let g: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.01).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i * 13) % 47) as f64 / 10.0 - 2.0).collect();
        let s = series(v, g);
        let report = regression_r2_uplift(&[s]).unwrap();
        let t = &report.per_ticker[0];
        assert!((t.r2_g_only - 1.0).abs() < 1e-12);
        assert!(t.uplift_abs.abs() < 1e-12);
    }

    #[test]
    fn nested_dominance_is_exact() {
        // Adversarial small series; dominance must hold without tolerance.
        for seed in 0..50u64 {
            let n = 60;
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            let g: Vec<f64> = (0..n).map(|_| next() * 3.0).collect();
            let v: Vec<f64> = (0..n).map(|_| next() * 4.0 - 2.0).collect();
            let report = regression_r2_uplift(&[series(v, g)]).unwrap();
            let t = &report.per_ticker[0];
            assert!(t.r2_g_and_v >= t.r2_g_only, "seed {seed}");
        }
    }

    #[test]
    fn grid_consistency_counts() {
        let n = 2000;
        let v: Vec<f64> = (0..n).map(|i| ((i * 29) % 2003) as f64 / 500.0 - 2.0).collect();
        let g: Vec<f64> = (0..n).map(|i| ((i * 53) % 2003) as f64 / 700.0).collect();
        let s = series(v, g);
        let grid = joint_quintile_grid(std::slice::from_ref(&s), Side::Top, 0.05, QuintileMode::PerStock).unwrap();
        let count_sum: usize = grid.cell_counts.iter().flatten().sum();
        assert_eq!(count_sum, grid.total_eligible);
        assert_eq!(grid.total_eligible, n - 1);
        // Occupancy-weighted relative probabilities average to 1.
        let weighted: f64 = grid
            .cells
            .iter()
            .flatten()
            .zip(grid.cell_counts.iter().flatten())
            .filter(|(c, _)| c.is_finite())
            .map(|(c, &n)| c * n as f64)
            .sum::<f64>()
            / grid.total_eligible as f64;
        assert!((weighted - 1.0).abs() < 1e-9);
    }

    #[test]
    fn grid_requires_pooled_extremes() {
        let n = 300;
        let v: Vec<f64> = (0..n).map(|i| (i % 7) as f64 - 3.0).collect();
        let g: Vec<f64> = (0..n).map(|i| (i % 11) as f64 / 3.0).collect();
        let s = series(v, g);
        let err = joint_quintile_grid(&[s], Side::Top, 0.01, QuintileMode::PerStock).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }
}
