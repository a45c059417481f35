//! Deterministic synthetic `(v, g)` universes used to verify every
//! estimator in the crate.
//!
//! Reproducibility contract: streams are ChaCha8 keyed by the spec seed,
//! one independent stream per ticker (`set_stream(ticker_index + 1)`), and
//! normal draws are Box-Muller using one variate per pair. Changing any of
//! this silently would invalidate golden outputs, so it is pinned here.

use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ingest;
use crate::normalize::{DetrendFit, NormalizationStats, NormalizedSeries};
use crate::stats::normal_cdf;
use crate::tailfit::{conditional_density, TailFitParams};
use crate::{Error, Result};

/// 80th percentile of |N(0,1)| (used by the injected-dependence scenario).
const ABS_NORMAL_Q80: f64 = 1.2815515655446004;
/// 99th percentile of |N(0,1)|.
const ABS_NORMAL_Q99: f64 = 2.5758293035489004;
/// 80th percentile of N(0,1).
const NORMAL_Q80: f64 = 0.8416212335729143;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// `(v, g)` pairs from the conditional tail model.
    Model,
    /// `v` and `g` independent.
    Iid,
    /// `g = (v + 4.5) · x` with `x` iid Exp(1): collapses exactly under
    /// the `g / (v + 4.5)` rescaling.
    Collapse,
    /// `g = exp(v) · Uniform(0.5, 1)`: a strictly monotone upper envelope.
    MonotoneEnvelope,
    /// Next-day extreme probability tripled when `v(t)` and `g(t)` are
    /// both top-quintile.
    InjectedDependence,
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "model" => Ok(Scenario::Model),
            "iid" => Ok(Scenario::Iid),
            "collapse" => Ok(Scenario::Collapse),
            "monotone-envelope" => Ok(Scenario::MonotoneEnvelope),
            "injected-dependence" => Ok(Scenario::InjectedDependence),
            other => Err(format!("unknown scenario '{other}'")),
        }
    }
}

/// Full description of a synthetic universe; generation is a pure function
/// of this value.
#[derive(Debug, Clone, Serialize)]
pub struct SynthSpec {
    pub n_days: usize,
    pub n_tickers: usize,
    pub params: TailFitParams,
    /// Optional truncation of the standard-normal volume law.
    pub v_bounds: Option<(f64, f64)>,
    pub scenario: Scenario,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(scenario: Scenario, n_tickers: usize, n_days: usize, seed: u64) -> Self {
        SynthSpec {
            n_days,
            n_tickers,
            params: TailFitParams::new(0.4, -1.23, -2.5, 3.0, 0.1),
            v_bounds: None,
            scenario,
            seed,
        }
    }

    pub fn with_params(mut self, params: TailFitParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_v_bounds(mut self, lo: f64, hi: f64) -> Self {
        self.v_bounds = Some((lo, hi));
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_days == 0 || self.n_tickers == 0 {
            return Err(Error::InfeasibleSpec("n_days and n_tickers must be >= 1".into()));
        }
        if let Some((lo, hi)) = self.v_bounds {
            if !(lo < hi) && !(lo == hi) {
                return Err(Error::InfeasibleSpec(format!("bad v bounds [{lo}, {hi}]")));
            }
            if normal_cdf(hi) - normal_cdf(lo) < 1e-6 {
                return Err(Error::InfeasibleSpec(format!(
                    "truncation interval [{lo}, {hi}] has negligible normal mass"
                )));
            }
        }
        if self.scenario == Scenario::Model {
            match self.v_bounds {
                Some((lo, hi)) => {
                    if self.params.sigma(lo) <= 0.0 || self.params.sigma(hi) <= 0.0 {
                        return Err(Error::InfeasibleSpec(format!(
                            "ς(v) not positive over v in [{lo}, {hi}]"
                        )));
                    }
                }
                None => {
                    if self.params.beta != 0.0 {
                        return Err(Error::InfeasibleSpec(
                            "model scenario with β ≠ 0 needs truncated v bounds".into(),
                        ));
                    }
                    if self.params.b <= 0.0 {
                        return Err(Error::InfeasibleSpec("b must be positive".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-ticker generator stream.
    fn stream(&self, ticker: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(ticker as u64 + 1);
        rng
    }
}

/// One standard-normal draw (Box-Muller, cosine branch only).
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `n` iid standard-normal draws, truncated by rejection to the spec's
/// volume bounds when present.
pub fn sample_volume<R: Rng>(n: usize, spec: &SynthSpec, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample_volume needs n >= 1".into()));
    }
    if let Some((lo, hi)) = spec.v_bounds {
        if normal_cdf(hi) - normal_cdf(lo) < 1e-6 {
            return Err(Error::InfeasibleSpec(format!(
                "truncation interval [{lo}, {hi}] has negligible normal mass"
            )));
        }
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(draw_volume(spec, rng));
    }
    Ok(out)
}

fn draw_volume<R: Rng>(spec: &SynthSpec, rng: &mut R) -> f64 {
    match spec.v_bounds {
        None => standard_normal(rng),
        Some((lo, hi)) => loop {
            let z = standard_normal(rng);
            if z >= lo && z <= hi {
                break z;
            }
        },
    }
}

/// Inverse-CDF sampler for the conditional tail density at one fixed `v`.
///
/// The CDF is tabulated by cumulative trapezoid quadrature of the density
/// over 4096 log-spaced points from `g_min` to the 1 - 1e-6 quantile
/// (found by bisection), then inverted by binary search with linear
/// interpolation.
pub struct ConditionalSampler {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

const CDF_GRID_POINTS: usize = 4096;
const TAIL_TRUNCATION: f64 = 1e-6;

impl ConditionalSampler {
    pub fn new(v: f64, params: &TailFitParams) -> Result<Self> {
        if params.sigma(v) <= 0.0 {
            return Err(Error::RateNonPositive { v });
        }
        let g_hi = upper_quantile(v, params)?;
        let ratio = g_hi / params.g_min;
        let grid: Vec<f64> = (0..CDF_GRID_POINTS)
            .map(|i| params.g_min * ratio.powf(i as f64 / (CDF_GRID_POINTS - 1) as f64))
            .collect();
        let dens: Vec<f64> = grid
            .iter()
            .map(|&g| conditional_density(g, v, params))
            .collect::<Result<_>>()?;
        let mut cdf = vec![0.0; CDF_GRID_POINTS];
        for i in 1..CDF_GRID_POINTS {
            cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (grid[i] - grid[i - 1]);
        }
        // The grid spans all mass but the truncated upper tail.
        let total = cdf[CDF_GRID_POINTS - 1];
        let scale = (1.0 - TAIL_TRUNCATION) / total;
        for c in cdf.iter_mut() {
            *c *= scale;
        }
        Ok(ConditionalSampler { grid, cdf })
    }

    /// One draw; always `>= g_min`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>() * self.cdf[CDF_GRID_POINTS - 1];
        self.invert(u)
    }

    fn invert(&self, u: f64) -> f64 {
        let i = match self.cdf.partition_point(|&c| c < u) {
            0 => return self.grid[0],
            i if i >= CDF_GRID_POINTS => CDF_GRID_POINTS - 1,
            i => i,
        };
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        if c1 <= c0 {
            return self.grid[i];
        }
        let frac = (u - c0) / (c1 - c0);
        self.grid[i - 1] + frac * (self.grid[i] - self.grid[i - 1])
    }

    /// Tabulated CDF at `g` (linear interpolation on the same grid).
    pub fn cdf_at(&self, g: f64) -> f64 {
        if g <= self.grid[0] {
            return 0.0;
        }
        if g >= self.grid[CDF_GRID_POINTS - 1] {
            return self.cdf[CDF_GRID_POINTS - 1];
        }
        let i = self.grid.partition_point(|&x| x < g);
        let frac = (g - self.grid[i - 1]) / (self.grid[i] - self.grid[i - 1]);
        self.cdf[i - 1] + frac * (self.cdf[i] - self.cdf[i - 1])
    }
}

/// Bisection for the `1 - 1e-6` quantile of the conditional density.
fn upper_quantile(v: f64, params: &TailFitParams) -> Result<f64> {
    let target = 1.0 - TAIL_TRUNCATION;
    let mut hi = params.g_min.max(1.0) * 2.0;
    while crate::tailfit::conditional_cdf(hi, v, params)? < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Domain("runaway upper quantile".into()));
        }
    }
    let mut lo = params.g_min;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if crate::tailfit::conditional_cdf(mid, v, params)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// One draw from the conditional tail density at `v`. Builds the tabulated
/// CDF on every call; batch users should hold a [`ConditionalSampler`].
pub fn sample_conditional_volatility<R: Rng>(
    v: f64,
    params: &TailFitParams,
    rng: &mut R,
) -> Result<f64> {
    Ok(ConditionalSampler::new(v, params)?.sample(rng))
}

/// Exact inversion of the conditional CDF by safeguarded Newton on the
/// closed-form CDF; used by the model scenario where every sample has its
/// own `v`.
fn invert_cdf_exact(u: f64, v: f64, params: &TailFitParams) -> Result<f64> {
    let sigma = params.sigma(v);
    if sigma <= 0.0 {
        return Err(Error::RateNonPositive { v });
    }
    let mut lo = params.g_min;
    let mut hi = params.g_min.max(1.0) * 2.0;
    while crate::tailfit::conditional_cdf(hi, v, params)? < u {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Domain("runaway quantile".into()));
        }
    }
    let mut g = 0.5 * (lo + hi);
    for _ in 0..100 {
        let f = crate::tailfit::conditional_cdf(g, v, params)? - u;
        if f > 0.0 {
            hi = g;
        } else {
            lo = g;
        }
        let d = conditional_density(g, v, params)?;
        let step = if d > 0.0 { f / d } else { f64::INFINITY };
        let mut next = g - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - g).abs() <= 1e-12 * g.max(1.0) {
            return Ok(next);
        }
        g = next;
    }
    Ok(g)
}

fn placeholder_stats() -> NormalizationStats {
    NormalizationStats {
        mean_return: 0.0,
        std_return: 1.0,
        mean_logvol: 0.0,
        std_logvol: 1.0,
    }
}

/// Generate a synthetic universe. Output `v`, `g` are used as-is (no
/// re-normalization) and every series carries the `synthetic` flag.
pub fn generate_universe(spec: &SynthSpec) -> Result<Vec<NormalizedSeries>> {
    spec.validate()?;
    let start = NaiveDate::from_ymd_opt(1990, 4, 2).unwrap();
    let mut universe = Vec::with_capacity(spec.n_tickers);
    for ticker_idx in 0..spec.n_tickers {
        let mut rng = spec.stream(ticker_idx);
        let (v, g) = generate_ticker(spec, &mut rng)?;
        universe.push(NormalizedSeries {
            ticker: format!("S{ticker_idx:02}"),
            dates: (0..spec.n_days)
                .map(|t| start + chrono::Days::new(t as u64))
                .collect(),
            g,
            v,
            stats: placeholder_stats(),
            detrend: DetrendFit { intercept: 0.0, slope: 0.0, n: spec.n_days },
            synthetic: true,
        });
    }
    Ok(universe)
}

fn generate_ticker<R: Rng>(spec: &SynthSpec, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = spec.n_days;
    match spec.scenario {
        Scenario::Model => {
            let v = sample_volume(n, spec, rng)?;
            let g = v
                .iter()
                .map(|&vi| invert_cdf_exact(rng.random(), vi, &spec.params))
                .collect::<Result<Vec<f64>>>()?;
            Ok((v, g))
        }
        Scenario::Iid => {
            let v = sample_volume(n, spec, rng)?;
            let g = (0..n).map(|_| standard_normal(rng).abs()).collect();
            Ok((v, g))
        }
        Scenario::Collapse => {
            // Bound v away from -4.5 so g stays positive.
            let bounded = SynthSpec {
                v_bounds: Some(spec.v_bounds.unwrap_or((-3.0, 3.0))),
                ..spec.clone()
            };
            let v = sample_volume(n, &bounded, rng)?;
            let g = v
                .iter()
                .map(|&vi| {
                    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                    (vi + 4.5) * (-u.ln())
                })
                .collect();
            Ok((v, g))
        }
        Scenario::MonotoneEnvelope => {
            let v = sample_volume(n, spec, rng)?;
            let g = v.iter().map(|&vi| vi.exp() * (0.5 + 0.5 * rng.random::<f64>())).collect();
            Ok((v, g))
        }
        Scenario::InjectedDependence => {
            let v = sample_volume(n, spec, rng)?;
            let mut g = Vec::with_capacity(n);
            g.push(standard_normal(rng).abs());
            for t in 1..n {
                let boosted = v[t - 1] > NORMAL_Q80 && g[t - 1] > ABS_NORMAL_Q80;
                let next = if boosted {
                    if rng.random::<f64>() < 0.03 {
                        // Forced tail draw above the 99th percentile.
                        ABS_NORMAL_Q99 - rng.random::<f64>().max(f64::MIN_POSITIVE).ln()
                    } else {
                        loop {
                            let x = standard_normal(rng).abs();
                            if x < ABS_NORMAL_Q99 {
                                break x;
                            }
                        }
                    }
                } else {
                    standard_normal(rng).abs()
                };
                g.push(next);
            }
            Ok((v, g))
        }
    }
}

/// Write a universe to `dir` in the ingest CSV format plus a sidecar
/// `synth_meta.json` flagging it synthetic.
///
/// Normalization is inverted nominally: price starts at 100 and follows
/// returns of magnitude `g` with random signs; volume is `exp(v) · 10⁶`.
pub fn write_universe_csv(dir: &Path, universe: &[NormalizedSeries], spec: &SynthSpec) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    for (idx, series) in universe.iter().enumerate() {
        // Sign stream independent of the generator streams.
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(1_000_000 + idx as u64);
        let mut close = 100.0f64;
        let mut bars = Vec::with_capacity(series.len());
        for t in 0..series.len() {
            let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
            // Scale returns down so prices stay in a sane range.
            close *= (sign * 0.01 * series.g[t]).exp();
            let volume = (series.v[t].exp() * 1e6).round().max(1.0) as u64;
            bars.push(ingest::DailyBar { date: series.dates[t], close, volume });
        }
        let out = ingest::StockSeries { ticker: series.ticker.clone(), bars };
        let path = dir.join(format!("{}.csv", series.ticker));
        std::fs::write(&path, out.to_csv()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    let meta = serde_json::json!({
        "synthetic": true,
        "spec": spec,
    });
    let path = dir.join("synth_meta.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta).unwrap()).map_err(|source| {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    })?;
    Ok(())
}
