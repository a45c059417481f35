//! Histogram density estimation, volume-conditional volatility
//! distributions, a one-sample normality check, and the scaling collapse of
//! conditional distributions under `g / (v + offset)`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::stats;
use crate::{Error, Result};

/// Histogram layout. Samples land in `[lo, hi)`; `logarithmic` spaces the
/// edges geometrically and requires `lo > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub n_bins: usize,
    pub scheme: BinScheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BinScheme {
    Linear,
    Logarithmic,
}

impl Binning {
    pub fn linear(lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        Self::new(lo, hi, n_bins, BinScheme::Linear)
    }

    pub fn logarithmic(lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        Self::new(lo, hi, n_bins, BinScheme::Logarithmic)
    }

    pub fn new(lo: f64, hi: f64, n_bins: usize, scheme: BinScheme) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidBinning(format!("lo {lo} must be < hi {hi}")));
        }
        if n_bins == 0 {
            return Err(Error::InvalidBinning("n_bins must be >= 1".into()));
        }
        if scheme == BinScheme::Logarithmic && lo <= 0.0 {
            return Err(Error::InvalidBinning("logarithmic binning requires lo > 0".into()));
        }
        Ok(Binning { lo, hi, n_bins, scheme })
    }

    /// Default volume binning: 30 linear bins on [-3, 3].
    pub fn default_volume() -> Self {
        Binning::linear(-3.0, 3.0, 30).unwrap()
    }

    /// Display binning for heavy-tailed volatility: 40 log bins on [0.01, 100].
    pub fn default_volatility() -> Self {
        Binning::logarithmic(0.01, 100.0, 40).unwrap()
    }

    pub fn edge(&self, i: usize) -> f64 {
        let f = i as f64 / self.n_bins as f64;
        match self.scheme {
            BinScheme::Linear => self.lo + f * (self.hi - self.lo),
            BinScheme::Logarithmic => self.lo * (self.hi / self.lo).powf(f),
        }
    }

    pub fn width(&self, bin: usize) -> f64 {
        self.edge(bin + 1) - self.edge(bin)
    }

    pub fn center(&self, bin: usize) -> f64 {
        match self.scheme {
            BinScheme::Linear => 0.5 * (self.edge(bin) + self.edge(bin + 1)),
            BinScheme::Logarithmic => (self.edge(bin) * self.edge(bin + 1)).sqrt(),
        }
    }

    /// Bin index of `x`, or `None` when `x` is outside `[lo, hi)`.
    pub fn index(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x < self.hi) {
            return None;
        }
        let f = match self.scheme {
            BinScheme::Linear => (x - self.lo) / (self.hi - self.lo),
            BinScheme::Logarithmic => (x / self.lo).ln() / (self.hi / self.lo).ln(),
        };
        Some(((f * self.n_bins as f64) as usize).min(self.n_bins - 1))
    }
}

/// Normalized histogram density: `Σ density · bin_width = 1` over the
/// in-range samples. `total_n` counts every offered sample, in range or not.
#[derive(Debug, Clone, Serialize)]
pub struct Pdf {
    pub bin_centers: Vec<f64>,
    pub densities: Vec<f64>,
    pub counts: Vec<usize>,
    pub total_n: usize,
}

impl Pdf {
    pub fn in_range(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Volatility pdfs conditioned on the volume bin.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalPdfFamily {
    pub volume_bins: Binning,
    /// Curves keyed by volume-bin index; only bins reaching `min_count`.
    pub curves: BTreeMap<usize, Pdf>,
    pub bin_occupancy: Vec<usize>,
}

/// Pairwise two-sample KS statistics between rescaled per-volume-bin
/// volatility samples. `collapse_score` is the worst (largest) pair.
#[derive(Debug, Clone, Serialize)]
pub struct CollapseReport {
    pub offset: f64,
    /// Occupied volume-bin indices, in order; rows/columns of the matrix.
    pub bin_indices: Vec<usize>,
    pub pairwise_ks: Vec<Vec<f64>>,
    pub collapse_score: f64,
}

/// Histogram density of `samples` under `binning`.
pub fn histogram_pdf(samples: &[f64], binning: &Binning) -> Result<Pdf> {
    let mut counts = vec![0usize; binning.n_bins];
    for &x in samples {
        if let Some(i) = binning.index(x) {
            counts[i] += 1;
        }
    }
    let in_range: usize = counts.iter().sum();
    if in_range == 0 {
        return Err(Error::EmptyHistogram { lo: binning.lo, hi: binning.hi });
    }
    let densities = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| c as f64 / (in_range as f64 * binning.width(i)))
        .collect();
    Ok(Pdf {
        bin_centers: (0..binning.n_bins).map(|i| binning.center(i)).collect(),
        densities,
        counts,
        total_n: samples.len(),
    })
}

/// One-sample KS statistic of pre-normalized samples against the standard
/// normal CDF.
pub fn normality_check(samples: &[f64]) -> Result<f64> {
    if samples.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "normality check needs >= 20 samples, got {}",
            samples.len()
        )));
    }
    if stats::std_pop(samples) == 0.0 {
        return Err(Error::DegenerateSample("constant samples".into()));
    }
    stats::ks_one_sample(samples, stats::normal_cdf)
}

/// Per-volume-bin volatility pdfs over pooled `(g, v)` pairs. Only volume
/// bins with at least `min_count` members carry a curve.
pub fn conditional_pdf(
    pooled: &[(f64, f64)],
    volume_bins: &Binning,
    g_bins: &Binning,
    min_count: usize,
) -> Result<ConditionalPdfFamily> {
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); volume_bins.n_bins];
    for &(g, v) in pooled {
        if let Some(i) = volume_bins.index(v) {
            members[i].push(g);
        }
    }
    let bin_occupancy: Vec<usize> = members.iter().map(Vec::len).collect();
    let mut curves = BTreeMap::new();
    for (i, gs) in members.iter().enumerate() {
        if gs.len() >= min_count.max(1) {
            curves.insert(i, histogram_pdf(gs, g_bins)?);
        }
    }
    if curves.is_empty() {
        return Err(Error::InsufficientConditionalData { min_count });
    }
    Ok(ConditionalPdfFamily {
        volume_bins: *volume_bins,
        curves,
        bin_occupancy,
    })
}

/// Rescale each sample's volatility to `g / (v + offset)` and compare the
/// rescaled distributions across occupied volume bins with pairwise
/// two-sample KS statistics.
pub fn scale_collapse(
    pooled: &[(f64, f64)],
    volume_bins: &Binning,
    offset: f64,
) -> Result<CollapseReport> {
    let mut bin_members: Vec<Vec<(f64, f64)>> = vec![Vec::new(); volume_bins.n_bins];
    let mut min_v = f64::INFINITY;
    for &(g, v) in pooled {
        if let Some(i) = volume_bins.index(v) {
            min_v = min_v.min(v);
            bin_members[i].push((g, v));
        }
    }
    if min_v.is_finite() && min_v + offset <= 0.0 {
        return Err(Error::OffsetTooSmall { min_offset: -min_v });
    }
    let scaled: Vec<(usize, Vec<f64>)> = bin_members
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(i, m)| (i, m.iter().map(|&(g, v)| g / (v + offset)).collect()))
        .collect();
    if scaled.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "scale collapse needs >= 2 occupied volume bins, got {}",
            scaled.len()
        )));
    }
    let k = scaled.len();
    let mut matrix = vec![vec![0.0; k]; k];
    let mut score: f64 = 0.0;
    for a in 0..k {
        for b in (a + 1)..k {
            let d = stats::ks_two_sample(&scaled[a].1, &scaled[b].1)?;
            matrix[a][b] = d;
            matrix[b][a] = d;
            score = score.max(d);
        }
    }
    Ok(CollapseReport {
        offset,
        bin_indices: scaled.into_iter().map(|(i, _)| i).collect(),
        pairwise_ks: matrix,
        collapse_score: score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bin_single_sample() {
        let b = Binning::linear(0.0, 1.0, 1).unwrap();
        let pdf = histogram_pdf(&[0.5], &b).unwrap();
        assert_eq!(pdf.densities, vec![1.0]);
        assert_eq!(pdf.counts, vec![1]);
    }

    #[test]
    fn all_samples_out_of_range() {
        let b = Binning::linear(0.0, 1.0, 4).unwrap();
        let err = histogram_pdf(&[5.0, -1.0], &b).unwrap_err();
        assert!(matches!(err, Error::EmptyHistogram { .. }));
    }

    #[test]
    fn pdf_integrates_to_one_linear_and_log() {
        let samples: Vec<f64> = (1..5000).map(|i| 0.01 + (i as f64 * 0.618).fract() * 50.0).collect();
        for b in [Binning::linear(0.0, 60.0, 37).unwrap(), Binning::logarithmic(0.01, 60.0, 23).unwrap()] {
            let pdf = histogram_pdf(&samples, &b).unwrap();
            let total: f64 = pdf
                .densities
                .iter()
                .enumerate()
                .map(|(i, d)| d * b.width(i))
                .sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_range_samples_reflected_in_total_n() {
        let b = Binning::linear(0.0, 1.0, 2).unwrap();
        let pdf = histogram_pdf(&[0.1, 0.6, 7.0], &b).unwrap();
        assert_eq!(pdf.total_n, 3);
        assert_eq!(pdf.in_range(), 2);
    }

    #[test]
    fn log_binning_rejects_nonpositive_lo() {
        assert!(Binning::logarithmic(0.0, 1.0, 5).is_err());
        assert!(Binning::linear(2.0, 1.0, 5).is_err());
    }

    #[test]
    fn index_edges() {
        let b = Binning::linear(-3.0, 3.0, 30).unwrap();
        assert_eq!(b.index(-3.0), Some(0));
        assert_eq!(b.index(3.0), None);
        assert_eq!(b.index(2.999_999), Some(29));
        assert_eq!(b.index(0.0), Some(15));
    }

    #[test]
    fn normality_check_rejects_constant() {
        let samples = vec![1.0; 30];
        assert!(matches!(normality_check(&samples), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn normality_check_needs_twenty() {
        let samples = vec![0.0, 1.0];
        assert!(matches!(normality_check(&samples), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn conditional_single_bin_matches_unconditional() {
        let pooled: Vec<(f64, f64)> = (0..500)
            .map(|i| ((i as f64 * 0.37).fract() * 3.0, (i as f64 * 0.73).fract() - 0.5))
            .collect();
        let vol_bins = Binning::linear(-1.0, 1.0, 1).unwrap();
        let g_bins = Binning::linear(0.0, 3.0, 12).unwrap();
        let fam = conditional_pdf(&pooled, &vol_bins, &g_bins, 1).unwrap();
        let all_g: Vec<f64> = pooled.iter().map(|p| p.0).collect();
        let reference = histogram_pdf(&all_g, &g_bins).unwrap();
        assert_eq!(fam.curves.len(), 1);
        assert_eq!(fam.curves[&0].counts, reference.counts);
    }

    #[test]
    fn conditional_min_count_too_large() {
        let pooled = vec![(1.0, 0.0); 10];
        let vol_bins = Binning::linear(-1.0, 1.0, 2).unwrap();
        let g_bins = Binning::linear(0.0, 3.0, 3).unwrap();
        let err = conditional_pdf(&pooled, &vol_bins, &g_bins, 100).unwrap_err();
        assert!(matches!(err, Error::InsufficientConditionalData { .. }));
    }

    #[test]
    fn collapse_identical_multisets_scores_zero() {
        // Two bins whose rescaled samples are identical multisets.
        let mut pooled = Vec::new();
        let xs = [0.3, 0.7, 1.1, 2.0];
        for &x in &xs {
            pooled.push((x * (0.5 + 4.5), 0.5)); // bin around v=0.5
            pooled.push((x * (-0.5 + 4.5), -0.5)); // bin around v=-0.5
        }
        let bins = Binning::linear(-1.0, 1.0, 2).unwrap();
        let report = scale_collapse(&pooled, &bins, 4.5).unwrap();
        assert_eq!(report.collapse_score, 0.0);
        assert_eq!(report.pairwise_ks[0][1], 0.0);
    }

    #[test]
    fn collapse_offset_too_small_names_minimum() {
        let pooled = vec![(1.0, -0.8), (1.0, 0.3)];
        let bins = Binning::linear(-1.0, 1.0, 2).unwrap();
        match scale_collapse(&pooled, &bins, 0.0) {
            Err(Error::OffsetTooSmall { min_offset }) => assert!((min_offset - 0.8).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn collapse_matrix_is_symmetric_with_zero_diagonal() {
        let pooled: Vec<(f64, f64)> = (0..900)
            .map(|i| {
                let v = (i as f64 * 0.31).fract() * 4.0 - 2.0;
                let g = (i as f64 * 0.17).fract() * 2.0;
                (g, v)
            })
            .collect();
        let bins = Binning::linear(-2.0, 2.0, 4).unwrap();
        let report = scale_collapse(&pooled, &bins, 4.5).unwrap();
        let k = report.bin_indices.len();
        for a in 0..k {
            assert_eq!(report.pairwise_ks[a][a], 0.0);
            for b in 0..k {
                assert_eq!(report.pairwise_ks[a][b], report.pairwise_ks[b][a]);
            }
        }
        assert!(report.collapse_score >= 0.0 && report.collapse_score <= 1.0);
    }
}
