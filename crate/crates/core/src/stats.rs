//! Shared statistical primitives: moments, Pearson correlation, ordinary
//! least squares and Kolmogorov-Smirnov statistics.
//!
//! All standard deviations here are population form (divide by N).

use crate::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_pop(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Pearson correlation coefficient of paired samples.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "pearson needs two equal-length samples of size >= 2".into(),
        ));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateSample("constant input to pearson".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Slope and intercept of the least-squares line `y = intercept + slope * x`.
pub fn ols_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("ols needs n >= 2 pairs".into()));
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateSample("constant regressor".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// R² of the one-regressor model `y ~ 1 + x`.
pub fn r2_single(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let rho = pearson(xs, ys)?;
    Ok(rho * rho)
}

/// R² of `y ~ 1 + x1 + x2`, computed by residualizing on x1 first so that
/// the nested-model dominance `r2_two >= r2_single(x1)` holds exactly in
/// floating point: the improvement term is a square and never negative.
pub fn r2_two(x1: &[f64], x2: &[f64], ys: &[f64]) -> Result<f64> {
    let r2_1 = r2_single(x1, ys)?;
    // Residualize y and x2 on [1, x1].
    let (sy, iy) = ols_line(x1, ys)?;
    let (sx, ix) = ols_line(x1, x2).map_err(|_| Error::DegenerateSample("constant regressor".into()))?;
    let ry: Vec<f64> = ys.iter().zip(x1).map(|(y, x)| y - (iy + sy * x)).collect();
    let rx: Vec<f64> = x2.iter().zip(x1).map(|(v, x)| v - (ix + sx * x)).collect();
    let extra = match pearson(&rx, &ry) {
        Ok(rho) => rho * rho,
        // x2 collinear with x1, or residual variance exhausted: no gain.
        Err(_) => 0.0,
    };
    Ok(r2_1 + extra * (1.0 - r2_1))
}

/// Two-sample Kolmogorov-Smirnov statistic: the supremum gap between the
/// two empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("ks_two_sample needs non-empty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// One-sample KS statistic against an arbitrary CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("ks_one_sample needs samples".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let c = cdf(*x);
        d = d.max((c - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - c).abs());
    }
    Ok(d)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_of_exact_line_is_one() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        assert!((pearson(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_three_points() {
        // ln Q = [1, 3, 2] at t = [0, 1, 2] -> slope 0.5, intercept 1.5.
        let (slope, intercept) = ols_line(&[0.0, 1.0, 2.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((slope - 0.5).abs() < 1e-12);
        assert!((intercept - 1.5).abs() < 1e-12);
    }

    #[test]
    fn r2_two_matches_normal_equations() {
        // Against a brute-force solve of the 3x3 normal equations.
        let n = 200;
        let x1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x2: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + 2.0 * x1[i] - 0.5 * x2[i] + (i as f64 * 2.9).sin())
            .collect();
        let r2 = r2_two(&x1, &x2, &y).unwrap();

        // Brute force: solve X'X beta = X'y with X = [1, x1, x2].
        let mut xtx = [[0.0f64; 3]; 3];
        let mut xty = [0.0f64; 3];
        for i in 0..n {
            let row = [1.0, x1[i], x2[i]];
            for r in 0..3 {
                for c in 0..3 {
                    xtx[r][c] += row[r] * row[c];
                }
                xty[r] += row[r] * y[i];
            }
        }
        // Gaussian elimination.
        let mut m = xtx;
        let mut b = xty;
        for col in 0..3 {
            let piv = (col..3).max_by(|&r, &s| m[r][col].abs().total_cmp(&m[s][col].abs())).unwrap();
            m.swap(col, piv);
            b.swap(col, piv);
            for r in 0..3 {
                if r != col {
                    let f = m[r][col] / m[col][col];
                    for c in 0..3 {
                        m[r][c] -= f * m[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
        let beta = [b[0] / m[0][0], b[1] / m[1][1], b[2] / m[2][2]];
        let my = mean(&y);
        let mut ssr = 0.0;
        let mut sst = 0.0;
        for i in 0..n {
            let fit = beta[0] + beta[1] * x1[i] + beta[2] * x2[i];
            ssr += (y[i] - fit) * (y[i] - fit);
            sst += (y[i] - my) * (y[i] - my);
        }
        assert!((r2 - (1.0 - ssr / sst)).abs() < 1e-10);
    }

    #[test]
    fn ks_two_sample_identical_is_zero() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn ks_two_sample_disjoint_is_one() {
        let a = [1.0, 2.0];
        let b = [10.0, 11.0];
        assert_eq!(ks_two_sample(&a, &b).unwrap(), 1.0);
        assert_eq!(ks_two_sample(&b, &a).unwrap(), 1.0);
    }

    #[test]
    fn normal_cdf_known_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-9);
    }
}
