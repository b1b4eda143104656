//! Lasso by cyclic coordinate descent on the Gram matrix.
//!
//! Objective: `½‖y − Xβ‖² + λ Σ|β_j|`.

use crate::error::{Error, Result};
use crate::mathkit::linalg::{dot, DesignMatrix};

/// `sign(z)(|z| − γ)₊`.
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LassoOptions {
    /// Relative objective change below which a sweep counts as converged.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Keep the per-sweep objective values.
    pub record_trace: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_sweeps: 10_000, record_trace: false }
    }
}

/// Sufficient statistics `(X'X, X'y, y'y)` of a least-squares problem.
#[derive(Clone, Copy, Debug)]
pub struct GramProblem<'a> {
    pub gram: &'a [f64],
    pub xty: &'a [f64],
    pub yty: f64,
}

impl GramProblem<'_> {
    pub fn dim(&self) -> usize {
        self.xty.len()
    }
}

#[derive(Clone, Debug)]
pub struct LassoSolution {
    pub beta: Vec<f64>,
    pub sweeps: usize,
    pub objective: f64,
    /// Objective after each sweep when requested.
    pub trace: Vec<f64>,
}

/// Coordinate descent from `start` (zeros if absent). A pinned coordinate is
/// held at its value and excluded from the updates.
pub fn lasso_cd(
    prob: GramProblem<'_>,
    lambda: f64,
    start: Option<&[f64]>,
    pin: Option<(usize, f64)>,
    opts: LassoOptions,
) -> Result<LassoSolution> {
    let p = prob.dim();
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lasso penalty must be non-negative, got {lambda}")));
    }
    let g = prob.gram;
    let mut beta = match start {
        Some(s) if s.len() == p => s.to_vec(),
        Some(s) => return Err(Error::Domain(format!("warm start has length {}, expected {p}", s.len()))),
        None => vec![0.0; p],
    };
    if let Some((j, v)) = pin {
        if j >= p {
            return Err(Error::Domain(format!("pinned index {j} out of range")));
        }
        beta[j] = v;
    }
    // c = X'y − X'X β, the correlation of each column with the residual.
    let mut c: Vec<f64> = (0..p).map(|a| prob.xty[a] - dot(&g[a * p..(a + 1) * p], &beta)).collect();
    let objective = |beta: &[f64], c: &[f64]| {
        let mut quad = 0.0;
        let mut l1 = 0.0;
        for a in 0..p {
            quad += beta[a] * (prob.xty[a] + c[a]);
            l1 += beta[a].abs();
        }
        0.5 * prob.yty - 0.5 * quad + lambda * l1
    };
    let scale = prob.yty.max(f64::MIN_POSITIVE);
    let mut f_prev = objective(&beta, &c);
    let mut trace = Vec::new();
    let mut rel_change = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        let mut max_step = 0.0_f64;
        for j in 0..p {
            if pin.is_some_and(|(k, _)| k == j) {
                continue;
            }
            let gjj = g[j * p + j];
            if gjj <= 0.0 {
                continue;
            }
            let z = c[j] + gjj * beta[j];
            let new = soft_threshold(z, lambda) / gjj;
            let delta = new - beta[j];
            if delta != 0.0 {
                let gj = &g[j * p..(j + 1) * p];
                for (ca, ga) in c.iter_mut().zip(gj) {
                    *ca -= delta * ga;
                }
                beta[j] = new;
                max_step = max_step.max(delta.abs() * gjj.sqrt());
            }
        }
        let f = objective(&beta, &c);
        debug_assert!(f <= f_prev + 1e-9 * scale, "objective rose: {f_prev} -> {f}");
        if opts.record_trace {
            trace.push(f);
        }
        rel_change = (f_prev - f).abs() / f.abs().max(1e-300);
        f_prev = f;
        if rel_change < opts.tol && max_step <= 1e-9 * scale.sqrt() {
            return Ok(LassoSolution { beta, sweeps: sweep, objective: f, trace });
        }
    }
    if rel_change < opts.tol {
        Ok(LassoSolution { beta, sweeps: opts.max_sweeps, objective: f_prev, trace })
    } else {
        Err(Error::NonConvergence { sweeps: opts.max_sweeps, rel_change })
    }
}

/// Lasso coefficients for the design `x` and response `y`.
pub fn lasso_fit(x: &DesignMatrix, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if y.len() != x.nrows() {
        return Err(Error::Domain(format!("response has {} rows, design {}", y.len(), x.nrows())));
    }
    let gram = x.gram();
    let xty = x.t_mul_vec(y);
    let prob = GramProblem { gram: &gram, xty: &xty, yty: dot(y, y) };
    Ok(lasso_cd(prob, lambda, None, None, LassoOptions::default())?.beta)
}

pub fn lasso_objective(x: &DesignMatrix, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let fit = x.mul_vec(beta);
    let rss: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * rss + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Largest violation of the Lasso KKT conditions, skipping `skip`.
pub fn kkt_violation(x: &DesignMatrix, y: &[f64], beta: &[f64], lambda: f64, skip: Option<usize>) -> f64 {
    let fit = x.mul_vec(beta);
    let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let grad = x.t_mul_vec(&r);
    let mut worst = 0.0_f64;
    for (j, (&b, &gj)) in beta.iter().zip(&grad).enumerate() {
        if skip == Some(j) {
            continue;
        }
        let v = if b != 0.0 { (gj - lambda * b.signum()).abs() } else { (gj.abs() - lambda).max(0.0) };
        worst = worst.max(v);
    }
    worst
}

/// `RSS / (n − s)` with `s` the number of nonzero coefficients.
pub fn reid_sigma2(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Result<f64> {
    let n = y.len();
    let s = beta.iter().filter(|b| **b != 0.0).count();
    if n <= s {
        return Err(Error::Degenerate(format!("variance estimate needs n > s (n = {n}, s = {s})")));
    }
    let fit = x.mul_vec(beta);
    let rss: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(rss / (n - s) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::linalg::{least_squares, Qr, Standardization};
    use crate::mathkit::rng::RngStream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian_problem(n: usize, p: usize, seed: u64) -> (DesignMatrix, Vec<f64>) {
        let mut rng = RngStream::new(seed).rng();
        let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = DesignMatrix::from_col_major(n, p, data).unwrap();
        x.standardize(Standardization::Sample).unwrap();
        let y: Vec<f64> = (0..n).map(|i| 3.0 * x.get(i, 0) + rng.sample::<f64, _>(StandardNormal)).collect();
        (x, y)
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(0.1, 0.2), 0.0);
        assert!((soft_threshold(1.0, 0.2) - 0.8).abs() < 1e-15);
        assert_eq!(soft_threshold(-1.0, 0.0), -1.0);
        assert!((soft_threshold(-1.0, 0.3) + 0.7).abs() < 1e-15);
    }

    #[test]
    fn zero_penalty_is_least_squares() {
        let (x, y) = gaussian_problem(60, 8, 1);
        let a = lasso_fit(&x, &y, 0.0).unwrap();
        let b = least_squares(&x, &y).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn orthonormal_design_closed_form() {
        // Orthonormal columns from a thin QR of a random design.
        let (x0, y) = gaussian_problem(40, 5, 2);
        let qr = Qr::new(&x0).unwrap();
        let cols: Vec<Vec<f64>> = (0..5)
            .map(|j| {
                let mut e = vec![0.0; 5];
                e[j] = 1.0;
                x0.mul_vec(&qr.r_solve(&e))
            })
            .collect();
        let q = DesignMatrix::from_columns(&cols).unwrap();
        let g = q.gram();
        for a in 0..5 {
            assert!((g[a * 5 + a] - 1.0).abs() < 1e-10);
        }
        for &lambda in &[0.0, 0.5, 2.0, 5.0] {
            let b = lasso_fit(&q, &y, lambda).unwrap();
            let qty = q.t_mul_vec(&y);
            for j in 0..5 {
                assert!((b[j] - soft_threshold(qty[j], lambda)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn large_penalty_gives_zero() {
        let (x, y) = gaussian_problem(50, 10, 3);
        let lmax = x.t_mul_vec(&y).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(lasso_fit(&x, &y, lmax).unwrap().iter().all(|b| *b == 0.0));
        assert!(lasso_fit(&x, &y, 2.0 * lmax).unwrap().iter().all(|b| *b == 0.0));
        assert!(lasso_fit(&x, &y, 0.9 * lmax).unwrap().iter().any(|b| *b != 0.0));
    }

    #[test]
    fn kkt_conditions_hold() {
        for seed in 0..5 {
            let (x, y) = gaussian_problem(100, 30, 10 + seed);
            for &lambda in &[1.0, 20.1, 63.1] {
                let b = lasso_fit(&x, &y, lambda).unwrap();
                assert!(kkt_violation(&x, &y, &b, lambda, None) <= 1e-6 * lambda, "seed {seed} lambda {lambda}");
            }
        }
    }

    #[test]
    fn objective_monotone_per_sweep() {
        let (x, y) = gaussian_problem(80, 40, 21);
        let gram = x.gram();
        let xty = x.t_mul_vec(&y);
        let prob = GramProblem { gram: &gram, xty: &xty, yty: dot(&y, &y) };
        let opts = LassoOptions { record_trace: true, ..Default::default() };
        let sol = lasso_cd(prob, 5.0, None, None, opts).unwrap();
        assert!(sol.trace.len() >= 2);
        let start = 0.5 * dot(&y, &y);
        assert!(sol.trace[0] <= start);
        for w in sol.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * start);
        }
        assert!((lasso_objective(&x, &y, &sol.beta, 5.0) - sol.objective).abs() < 1e-8 * start);
    }

    #[test]
    fn warm_start_reaches_same_point() {
        let (x, y) = gaussian_problem(100, 30, 31);
        let gram = x.gram();
        let xty = x.t_mul_vec(&y);
        let prob = GramProblem { gram: &gram, xty: &xty, yty: dot(&y, &y) };
        let cold = lasso_cd(prob, 20.1, None, None, LassoOptions::default()).unwrap();
        let start: Vec<f64> = cold.beta.iter().map(|b| b + 0.3).collect();
        let warm = lasso_cd(prob, 20.1, Some(&start), None, LassoOptions::default()).unwrap();
        for (a, b) in cold.beta.iter().zip(&warm.beta) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn pinned_coordinate_at_optimum_is_noop() {
        let (x, y) = gaussian_problem(100, 30, 41);
        let gram = x.gram();
        let xty = x.t_mul_vec(&y);
        let prob = GramProblem { gram: &gram, xty: &xty, yty: dot(&y, &y) };
        let full = lasso_cd(prob, 20.1, None, None, LassoOptions::default()).unwrap();
        let pinned = lasso_cd(prob, 20.1, None, Some((0, full.beta[0])), LassoOptions::default()).unwrap();
        for (a, b) in full.beta.iter().zip(&pinned.beta) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn max_sweeps_exhaustion_reports_error() {
        let (x, y) = gaussian_problem(100, 30, 51);
        let gram = x.gram();
        let xty = x.t_mul_vec(&y);
        let prob = GramProblem { gram: &gram, xty: &xty, yty: dot(&y, &y) };
        let opts = LassoOptions { max_sweeps: 1, ..Default::default() };
        assert!(matches!(lasso_cd(prob, 1.0, None, None, opts), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn reid_guards_and_zero_residual() {
        let x = DesignMatrix::identity(3);
        let y = [1.0, 2.0, 3.0];
        assert!(matches!(reid_sigma2(&x, &y, &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
        let x = DesignMatrix::from_columns(&[vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        assert_eq!(reid_sigma2(&x, &[2.0, 4.0, 6.0, 8.0], &[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn reid_band_on_simulated_data() {
        for seed in 0..100 {
            let (x, y) = gaussian_problem(100, 30, 1000 + seed);
            let b = lasso_fit(&x, &y, 20.1).unwrap();
            let s2 = reid_sigma2(&x, &y, &b).unwrap();
            assert!((0.6..=1.5).contains(&s2), "seed {seed}: {s2}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn soft_threshold_shrinks(z in -10.0f64..10.0, g in 0.0f64..5.0) {
            let s = soft_threshold(z, g);
            prop_assert!(s.abs() <= z.abs());
            prop_assert!(s == 0.0 || s.signum() == z.signum());
            prop_assert!((s.abs() - (z.abs() - g).max(0.0)).abs() < 1e-12);
        }

        #[test]
        fn kkt_random_penalties(seed in 0u64..1000, lambda in 0.1f64..50.0) {
            let (x, y) = gaussian_problem(40, 12, seed);
            let b = lasso_fit(&x, &y, lambda).unwrap();
            prop_assert!(kkt_violation(&x, &y, &b, lambda, None) <= 1e-6 * lambda);
        }
    }
}
