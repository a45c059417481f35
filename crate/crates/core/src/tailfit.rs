//! Maximum-likelihood fit of the volume-conditional volatility tail model
//!
//! ```text
//! P(g | v) = C(v) · g^{-ξ(v)} · e^{-ς(v) g},     g ≥ g_min,
//! ξ(v) = α v + a,   ς(v) = β v + b,
//! C(v) = ς(v)^{1-ξ(v)} / Γ(1-ξ(v), ς(v) g_min),
//! ```
//!
//! a power law with exponential cutoff whose exponent and rate are both
//! affine in volume. The model is unnormalizable over (0, ∞) when
//! `ξ ≥ 1`, so the fit is restricted to the tail `g ≥ g_min` and
//! normalized with the upper incomplete gamma function.

use serde::Serialize;

use crate::distributions::Binning;
use crate::optim::{self, SimplexResult};
use crate::special::{ln_upper_inc_gamma, upper_inc_gamma};
use crate::{Error, Result};

/// Penalty returned for candidates with `ς(v) ≤ 0` anywhere in the sample,
/// keeping the simplex search total.
pub const INFEASIBLE_PENALTY: f64 = 1e12;

/// Minimum number of tail samples accepted by the fitter.
pub const MIN_TAIL_SAMPLES: usize = 50;

/// Fitted parameters of the conditional tail model.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailFitParams {
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub g_min: f64,
    pub n_tail: usize,
    pub nll: f64,
}

impl TailFitParams {
    pub fn new(alpha: f64, beta: f64, a: f64, b: f64, g_min: f64) -> Self {
        TailFitParams { alpha, beta, a, b, g_min, n_tail: 0, nll: f64::NAN }
    }

    /// Power-law exponent at volume `v`.
    pub fn xi(&self, v: f64) -> f64 {
        self.alpha * v + self.a
    }

    /// Exponential cutoff rate at volume `v`.
    pub fn sigma(&self, v: f64) -> f64 {
        self.beta * v + self.b
    }
}

/// Conditional density evaluated on a rectangular grid; infeasible volume
/// columns (`ς(v) ≤ 0`) are dropped and listed in `skipped_v`.
#[derive(Debug, Clone, Serialize)]
pub struct DensityGrid {
    pub g_values: Vec<f64>,
    pub v_values: Vec<f64>,
    /// `densities[i][j]` is the density at `(g_values[i], v_values[j])`.
    pub densities: Vec<Vec<f64>>,
    pub skipped_v: Vec<f64>,
}

/// Default optimizer box: a generous region around plausible parameters.
pub fn default_bounds() -> [(f64, f64); 4] {
    [(-2.0, 2.0), (-5.0, 5.0), (-10.0, 10.0), (0.01, 20.0)]
}

/// Default simplex starting point `(α, β, a, b)`.
pub const DEFAULT_INIT: (f64, f64, f64, f64) = (0.0, 0.0, 1.5, 1.0);

/// Normalized conditional tail density at `(g, v)`.
pub fn conditional_density(g: f64, v: f64, params: &TailFitParams) -> Result<f64> {
    if g < params.g_min {
        return Err(Error::Domain(format!(
            "g = {g} below tail threshold g_min = {}",
            params.g_min
        )));
    }
    let sigma = params.sigma(v);
    if sigma <= 0.0 {
        return Err(Error::RateNonPositive { v });
    }
    let xi = params.xi(v);
    let log_norm =
        (1.0 - xi) * sigma.ln() - ln_upper_inc_gamma(1.0 - xi, sigma * params.g_min);
    Ok((log_norm - xi * g.ln() - sigma * g).exp())
}

/// Exact negative log-likelihood of `(g, v)` tail samples under candidate
/// parameters `(α, β, a, b)`.
pub fn neg_log_likelihood(
    samples: &[(f64, f64)],
    candidate: (f64, f64, f64, f64),
    g_min: f64,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("NLL over empty sample set".into()));
    }
    let (alpha, beta, a, b) = candidate;
    let mut nll = 0.0;
    for &(g, v) in samples {
        let sigma = beta * v + b;
        if sigma <= 0.0 {
            return Err(Error::RateNonPositive { v });
        }
        let xi = alpha * v + a;
        nll += xi * g.ln()
            + sigma * g
            + ln_upper_inc_gamma(1.0 - xi, sigma * g_min)
            + (xi - 1.0) * sigma.ln();
    }
    if !nll.is_finite() {
        return Err(Error::Domain("non-finite log-likelihood".into()));
    }
    Ok(nll)
}

/// Objective used inside the fitter. Exploits the affine structure: the
/// `ξ ln g + ς g` part collapses to four precomputed sums, and the
/// per-sample normalizer `ln Γ(1-ξ(v), ς(v) g_min) + (ξ(v)-1) ln ς(v)` is
/// a smooth function of `v` alone, so for large samples it is evaluated on
/// a dense `v` grid and linearly interpolated. Small samples are summed
/// exactly.
struct NllObjective {
    g_min: f64,
    sum_lg: f64,
    sum_vlg: f64,
    sum_g: f64,
    sum_vg: f64,
    v_lo: f64,
    v_hi: f64,
    /// (node index, fraction) per sample; empty when evaluating exactly.
    grid_pos: Vec<(usize, f64)>,
    nodes: usize,
    exact_v: Vec<f64>,
}

/// Sample count above which the interpolated normalizer path kicks in.
const EXACT_NLL_LIMIT: usize = 4096;
/// Interior interpolation nodes; error is O((Δv)²) and far below the
/// optimizer's convergence scale at this density.
const NLL_GRID_NODES: usize = 1025;

impl NllObjective {
    fn new(samples: &[(f64, f64)], g_min: f64) -> Self {
        let n = samples.len();
        let mut sum_lg = 0.0;
        let mut sum_vlg = 0.0;
        let mut sum_g = 0.0;
        let mut sum_vg = 0.0;
        let mut v_lo = f64::INFINITY;
        let mut v_hi = f64::NEG_INFINITY;
        for &(g, v) in samples {
            let lg = g.ln();
            sum_lg += lg;
            sum_vlg += v * lg;
            sum_g += g;
            sum_vg += v * g;
            v_lo = v_lo.min(v);
            v_hi = v_hi.max(v);
        }
        let interpolate = n > EXACT_NLL_LIMIT && v_hi - v_lo > 1e-9;
        let (grid_pos, exact_v) = if interpolate {
            let step = (v_hi - v_lo) / (NLL_GRID_NODES - 1) as f64;
            let pos = samples
                .iter()
                .map(|&(_, v)| {
                    let f = (v - v_lo) / step;
                    let i = (f as usize).min(NLL_GRID_NODES - 2);
                    (i, f - i as f64)
                })
                .collect();
            (pos, Vec::new())
        } else {
            (Vec::new(), samples.iter().map(|&(_, v)| v).collect())
        };
        NllObjective {
            g_min,
            sum_lg,
            sum_vlg,
            sum_g,
            sum_vg,
            v_lo,
            v_hi,
            grid_pos,
            nodes: NLL_GRID_NODES,
            exact_v,
        }
    }

    fn normalizer_term(&self, xi: f64, sigma: f64) -> f64 {
        ln_upper_inc_gamma(1.0 - xi, sigma * self.g_min) + (xi - 1.0) * sigma.ln()
    }

    fn eval(&self, c: &[f64]) -> f64 {
        let (alpha, beta, a, b) = (c[0], c[1], c[2], c[3]);
        // ς is affine in v, so positivity at both extremes covers all samples.
        if beta * self.v_lo + b <= 0.0 || beta * self.v_hi + b <= 0.0 {
            return INFEASIBLE_PENALTY;
        }
        let linear = alpha * self.sum_vlg + a * self.sum_lg + beta * self.sum_vg + b * self.sum_g;
        let normalizer = if self.grid_pos.is_empty() {
            self.exact_v
                .iter()
                .map(|&v| self.normalizer_term(alpha * v + a, beta * v + b))
                .sum::<f64>()
        } else {
            let step = (self.v_hi - self.v_lo) / (self.nodes - 1) as f64;
            let h: Vec<f64> = (0..self.nodes)
                .map(|i| {
                    let v = self.v_lo + i as f64 * step;
                    self.normalizer_term(alpha * v + a, beta * v + b)
                })
                .collect();
            self.grid_pos
                .iter()
                .map(|&(i, frac)| h[i] + frac * (h[i + 1] - h[i]))
                .sum::<f64>()
        };
        let nll = linear + normalizer;
        if nll.is_finite() {
            nll
        } else {
            INFEASIBLE_PENALTY
        }
    }
}

/// Fit `(α, β, a, b)` on the tail samples (`g ≥ g_min`) by Nelder-Mead
/// descent on the negative log-likelihood. Deterministic given `init`.
pub fn fit_conditional_tail(
    samples: &[(f64, f64)],
    g_min: f64,
    init: (f64, f64, f64, f64),
    bounds: &[(f64, f64); 4],
) -> Result<TailFitParams> {
    let tail: Vec<(f64, f64)> = samples.iter().copied().filter(|&(g, _)| g >= g_min).collect();
    if tail.len() < MIN_TAIL_SAMPLES {
        return Err(Error::NoTailSamples { min: MIN_TAIL_SAMPLES, g_min });
    }
    let objective = NllObjective::new(&tail, g_min);
    let x0 = [init.0, init.1, init.2, init.3];
    if objective.eval(&x0) >= INFEASIBLE_PENALTY {
        return Err(Error::InfeasibleInit(format!(
            "ς(v) not positive over sample v-range [{}, {}] at init ({}, {}, {}, {})",
            objective.v_lo, objective.v_hi, init.0, init.1, init.2, init.3
        )));
    }
    let SimplexResult { x, .. } = optim::nelder_mead(
        |c| objective.eval(c),
        &x0,
        bounds,
        1e-6,
        100_000,
    );
    let candidate = (x[0], x[1], x[2], x[3]);
    // Report the exact NLL at the optimum, not the fast objective's value.
    let nll = neg_log_likelihood(&tail, candidate, g_min)?;
    Ok(TailFitParams {
        alpha: candidate.0,
        beta: candidate.1,
        a: candidate.2,
        b: candidate.3,
        g_min,
        n_tail: tail.len(),
        nll,
    })
}

/// Evaluate the fitted density over a `(g, v)` grid (bin centers of the two
/// binnings). Infeasible volume columns are omitted and reported.
pub fn density_grid(params: &TailFitParams, g_range: &Binning, v_range: &Binning) -> Result<DensityGrid> {
    if g_range.lo < params.g_min {
        return Err(Error::Domain(format!(
            "g range starts at {} below g_min = {}",
            g_range.lo, params.g_min
        )));
    }
    let g_values: Vec<f64> = (0..g_range.n_bins).map(|i| g_range.center(i)).collect();
    let mut v_values = Vec::new();
    let mut skipped_v = Vec::new();
    for j in 0..v_range.n_bins {
        let v = v_range.center(j);
        if params.sigma(v) > 0.0 {
            v_values.push(v);
        } else {
            skipped_v.push(v);
        }
    }
    if v_values.is_empty() {
        return Err(Error::RateNonPositive { v: v_range.center(0) });
    }
    let densities = g_values
        .iter()
        .map(|&g| {
            v_values
                .iter()
                .map(|&v| conditional_density(g, v, params))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityGrid { g_values, v_values, densities, skipped_v })
}

/// CDF of the conditional tail model at fixed `v`:
/// `P(G ≤ g | v) = 1 − Γ(1−ξ, ς g) / Γ(1−ξ, ς g_min)`.
pub fn conditional_cdf(g: f64, v: f64, params: &TailFitParams) -> Result<f64> {
    let sigma = params.sigma(v);
    if sigma <= 0.0 {
        return Err(Error::RateNonPositive { v });
    }
    if g <= params.g_min {
        return Ok(0.0);
    }
    let s = 1.0 - params.xi(v);
    let tail = upper_inc_gamma(s, sigma * g) / upper_inc_gamma(s, sigma * params.g_min);
    Ok((1.0 - tail).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::integrate;

    fn reference_params() -> TailFitParams {
        TailFitParams::new(0.4, -1.23, -2.5, 3.0, 0.1)
    }

    #[test]
    fn degenerate_parameters_reduce_to_exponential() {
        // α=β=0, a=0, b=1, tiny g_min: density ≈ e^{-g}.
        let p = TailFitParams::new(0.0, 0.0, 0.0, 1.0, 1e-9);
        for &g in &[0.5, 1.0, 2.0, 4.0] {
            let d = conditional_density(g, 0.3, &p).unwrap();
            assert!((d - (-g as f64).exp()).abs() < 1e-6, "g={g}: {d}");
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let p = reference_params();
        for &v in &[-2.0, -0.5, 0.0, 1.0, 2.0] {
            let f = |g: f64| conditional_density(g, v, &p).unwrap();
            // ς ≥ 0.54 over this v-range; the density is negligible by g = 120.
            let total = integrate(&f, p.g_min, 120.0, 1e-9);
            assert!((total - 1.0).abs() < 1e-6, "v={v}: {total}");
        }
    }

    #[test]
    fn rate_boundary_errors() {
        let p = reference_params();
        // βv + b = 0 at v = 3/1.23
        let v = 3.0 / 1.23;
        assert!(matches!(
            conditional_density(1.0, v, &p),
            Err(Error::RateNonPositive { .. })
        ));
        assert!(matches!(conditional_density(0.05, 0.0, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn nll_single_sample_is_minus_log_density() {
        let p = reference_params();
        let (g, v) = (1.7, 0.4);
        let nll = neg_log_likelihood(&[(g, v)], (p.alpha, p.beta, p.a, p.b), p.g_min).unwrap();
        let d = conditional_density(g, v, &p).unwrap();
        assert!((nll + d.ln()).abs() < 1e-9);
    }

    #[test]
    fn nll_empty_sample_errors() {
        assert!(neg_log_likelihood(&[], (0.0, 0.0, 1.0, 1.0), 0.1).is_err());
    }

    #[test]
    fn nll_infeasible_sample_errors() {
        let err = neg_log_likelihood(&[(1.0, 3.0)], (0.0, -1.23, 1.0, 3.0), 0.1).unwrap_err();
        assert!(matches!(err, Error::RateNonPositive { .. }));
    }

    #[test]
    fn objective_matches_exact_nll_below_limit() {
        let samples: Vec<(f64, f64)> = (0..300)
            .map(|i| {
                let v = (i as f64 * 0.37).fract() * 3.0 - 1.5;
                let g = 0.1 + (i as f64 * 0.61).fract() * 4.0;
                (g, v)
            })
            .collect();
        let obj = NllObjective::new(&samples, 0.1);
        let c = [0.2, -0.8, -1.0, 2.5];
        let exact = neg_log_likelihood(&samples, (c[0], c[1], c[2], c[3]), 0.1).unwrap();
        assert!((obj.eval(&c) - exact).abs() < 1e-9 * exact.abs().max(1.0));
    }

    #[test]
    fn interpolated_objective_is_close_to_exact() {
        let samples: Vec<(f64, f64)> = (0..10_000)
            .map(|i| {
                let v = (i as f64 * 0.37).fract() * 4.0 - 2.0;
                let g = 0.1 + (i as f64 * 0.61).fract() * 4.0;
                (g, v)
            })
            .collect();
        let obj = NllObjective::new(&samples, 0.1);
        assert!(!obj.grid_pos.is_empty());
        let c = [0.4, -1.23, -2.5, 3.0];
        let exact = neg_log_likelihood(&samples, (c[0], c[1], c[2], c[3]), 0.1).unwrap();
        let approx = obj.eval(&c);
        // Relative error of the interpolated normalizer is tiny.
        assert!(((approx - exact) / exact).abs() < 2e-6, "{approx} vs {exact}");
    }

    #[test]
    fn too_few_tail_samples() {
        let samples = vec![(0.05, 0.0); 200]; // all below g_min
        let err = fit_conditional_tail(&samples, 0.1, DEFAULT_INIT, &default_bounds()).unwrap_err();
        assert!(matches!(err, Error::NoTailSamples { .. }));
    }

    #[test]
    fn infeasible_init_is_rejected() {
        let samples: Vec<(f64, f64)> = (0..100).map(|i| (1.0 + i as f64 * 0.01, 2.0)).collect();
        // β = -5, b = 0.01: ς(2) < 0 at init.
        let err = fit_conditional_tail(&samples, 0.1, (0.0, -5.0, 1.5, 0.01), &default_bounds())
            .unwrap_err();
        assert!(matches!(err, Error::InfeasibleInit(_)));
    }

    #[test]
    fn grid_single_point_matches_density() {
        let p = reference_params();
        let g_range = Binning::linear(1.0, 1.2, 1).unwrap();
        let v_range = Binning::linear(-0.1, 0.1, 1).unwrap();
        let grid = density_grid(&p, &g_range, &v_range).unwrap();
        assert_eq!(grid.densities.len(), 1);
        let expected = conditional_density(grid.g_values[0], grid.v_values[0], &p).unwrap();
        assert_eq!(grid.densities[0][0], expected);
    }

    #[test]
    fn grid_skips_infeasible_columns() {
        let p = reference_params();
        // Feasible only below v = 3/1.23 ≈ 2.44.
        let g_range = Binning::linear(0.5, 2.0, 4).unwrap();
        let v_range = Binning::linear(2.0, 3.0, 5).unwrap();
        let grid = density_grid(&p, &g_range, &v_range).unwrap();
        assert!(!grid.skipped_v.is_empty());
        assert!(grid.v_values.iter().all(|&v| p.sigma(v) > 0.0));

        let all_bad = Binning::linear(2.5, 3.5, 3).unwrap();
        assert!(density_grid(&p, &g_range, &all_bad).is_err());
    }

    #[test]
    fn ridge_moves_right_as_volume_grows() {
        // With the reference parameters, the g matching a fixed density level
        // increases with v over the feasible region.
        let p = reference_params();
        let level = 0.05;
        let g_at_level = |v: f64| {
            // Scan the decreasing flank beyond the mode.
            let mode = (-p.xi(v) / p.sigma(v)).max(p.g_min);
            let mut g = mode;
            while conditional_density(g, v, &p).unwrap() > level {
                g += 0.01;
            }
            g
        };
        let gs: Vec<f64> = [-1.0, 0.0, 1.0, 2.0].iter().map(|&v| g_at_level(v)).collect();
        for w in gs.windows(2) {
            assert!(w[1] > w[0], "{gs:?}");
        }
    }

    #[test]
    fn log_derivative_sign_analysis() {
        // Beyond g* = -ξ/ς the density strictly decreases; when ξ ≥ 0 it
        // decreases everywhere on the tail.
        let p = reference_params();
        let v = 0.0; // ξ = -2.5, ς = 3 → g* = 2.5/3
        let gstar = -p.xi(v) / p.sigma(v);
        let mut last = conditional_density(gstar + 1e-6, v, &p).unwrap();
        let mut g = gstar + 0.05;
        while g < 20.0 {
            let d = conditional_density(g, v, &p).unwrap();
            assert!(d < last);
            last = d;
            g += 0.05;
        }

        let pos = TailFitParams::new(0.0, 0.0, 0.5, 1.0, 0.1); // ξ = 0.5 ≥ 0
        let mut last = conditional_density(0.1, 0.0, &pos).unwrap();
        let mut g = 0.15;
        while g < 10.0 {
            let d = conditional_density(g, 0.0, &pos).unwrap();
            assert!(d < last);
            last = d;
            g += 0.05;
        }
    }

    #[test]
    fn cdf_monotone_and_bounded() {
        let p = reference_params();
        let mut last = 0.0;
        for i in 0..200 {
            let g = 0.1 + i as f64 * 0.1;
            let c = conditional_cdf(g, 0.5, &p).unwrap();
            assert!((0.0..=1.0).contains(&c));
            assert!(c >= last);
            last = c;
        }
        assert!(last > 0.999);
    }
}
