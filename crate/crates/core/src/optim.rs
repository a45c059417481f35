//! Derivative-free Nelder-Mead simplex minimization with box constraints.
//!
//! Candidate points are clamped into the box before evaluation, which keeps
//! the method total on constrained problems; the objective itself is free to
//! return large penalty values for infeasible regions inside the box.

/// Result of a simplex run.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    /// Final simplex diameter (max vertex distance in the infinity norm).
    pub diameter: f64,
    pub converged: bool,
}

/// Minimize `f` starting from `init`, constrained to `bounds` (inclusive
/// per-coordinate intervals). Stops when the simplex diameter drops below
/// `diameter_tol` or after `max_evals` objective evaluations.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    init: &[f64],
    bounds: &[(f64, f64)],
    diameter_tol: f64,
    max_evals: usize,
) -> SimplexResult {
    assert_eq!(init.len(), bounds.len());
    let n = init.len();
    let clamp = |x: &mut Vec<f64>| {
        for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *xi = xi.clamp(lo, hi);
        }
    };

    let mut evals = 0usize;
    let mut eval = |x: &mut Vec<f64>, evals: &mut usize| -> f64 {
        clamp(x);
        *evals += 1;
        f(x)
    };

    // Initial simplex: init plus a perturbation along each axis.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut x0 = init.to_vec();
    let f0 = eval(&mut x0, &mut evals);
    simplex.push((x0, f0));
    for i in 0..n {
        let mut x = init.to_vec();
        let span = bounds[i].1 - bounds[i].0;
        let step = if x[i].abs() > 1e-8 { 0.1 * x[i].abs() } else { 0.05 * span.min(1.0).max(1e-3) };
        x[i] = if x[i] + step <= bounds[i].1 { x[i] + step } else { x[i] - step };
        let fx = eval(&mut x, &mut evals);
        simplex.push((x, fx));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let diameter = |s: &[(Vec<f64>, f64)]| -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..s.len() {
            for j in (i + 1)..s.len() {
                let dist = s[i]
                    .0
                    .iter()
                    .zip(&s[j].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                d = d.max(dist);
            }
        }
        d
    };

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let d = diameter(&simplex);
        if d < diameter_tol || evals >= max_evals {
            return SimplexResult {
                x: simplex[0].0.clone(),
                fx: simplex[0].1,
                evals,
                diameter: d,
                converged: d < diameter_tol,
            };
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();

        let mut reflected: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let fr = eval(&mut reflected, &mut evals);

        if fr < simplex[0].1 {
            // Try expanding further in the same direction.
            let mut expanded: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + gamma * (c - w))
                .collect();
            let fe = eval(&mut expanded, &mut evals);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }

        // Contraction, outside or inside of the worst vertex.
        let (mut contracted, better_of): (Vec<f64>, f64) = if fr < worst.1 {
            (
                centroid.iter().zip(&reflected).map(|(c, r)| c + rho * (r - c)).collect(),
                fr,
            )
        } else {
            (
                centroid.iter().zip(&worst.0).map(|(c, w)| c + rho * (w - c)).collect(),
                worst.1,
            )
        };
        let fc = eval(&mut contracted, &mut evals);
        if fc < better_of {
            simplex[n] = (contracted, fc);
            continue;
        }

        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut x: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + sigma * (v - b))
                .collect();
            let fx = eval(&mut x, &mut evals);
            *vertex = (x, fx);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + (x[1] + 0.5).powi(2);
        let r = nelder_mead(f, &[0.0, 0.0], &[(-5.0, 5.0), (-5.0, 5.0)], 1e-8, 10_000);
        assert!(r.converged);
        assert!((r.x[0] - 1.5).abs() < 1e-6);
        assert!((r.x[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn respects_box_constraints() {
        // Unconstrained minimum at (3, 3); box caps it at (1, 1).
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] - 3.0).powi(2);
        let r = nelder_mead(f, &[0.0, 0.0], &[(-1.0, 1.0), (-1.0, 1.0)], 1e-8, 10_000);
        assert!(r.x[0] <= 1.0 && r.x[1] <= 1.0);
        assert!((r.x[0] - 1.0).abs() < 1e-5);
        assert!((r.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock_four_dims() {
        let f = |x: &[f64]| {
            x.windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum::<f64>()
        };
        let bounds = vec![(-5.0, 5.0); 4];
        let r = nelder_mead(f, &[-1.2, 1.0, -1.2, 1.0], &bounds, 1e-9, 100_000);
        for xi in &r.x {
            assert!((xi - 1.0).abs() < 1e-3, "x = {:?}", r.x);
        }
    }

    #[test]
    fn deterministic_given_init() {
        let f = |x: &[f64]| x[0].sin() + (x[1] * 0.7).cos() + 0.1 * (x[0] * x[0] + x[1] * x[1]);
        let bounds = [(-10.0, 10.0), (-10.0, 10.0)];
        let a = nelder_mead(f, &[2.0, -3.0], &bounds, 1e-8, 50_000);
        let b = nelder_mead(f, &[2.0, -3.0], &bounds, 1e-8, 50_000);
        assert_eq!(a.x, b.x);
        assert_eq!(a.evals, b.evals);
    }

    #[test]
    fn eval_budget_is_respected() {
        let f = |x: &[f64]| x[0] * x[0];
        let r = nelder_mead(f, &[4.0], &[(-5.0, 5.0)], 0.0, 100);
        assert!(r.evals <= 110); // budget is checked once per iteration
        assert!(!r.converged);
    }
}
