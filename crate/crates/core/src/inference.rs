//! Confidence regions and intervals from bootstrap draws, classical bootstrap
//! baselines, and exact fiducial draws for linear regression.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{resample_m_of_n, CandidateDraw};
use crate::contour::Observed;
use crate::error::{Error, Result};
use crate::mathkit::linalg::Qr;
use crate::mathkit::rng::RngStream;
use crate::mathkit::sampling::student_t_vector_sample;
use crate::mathkit::stats::{empirical_quantile, type1_index};
use crate::models::{Dataset, Model};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cb,
    StandardBootstrap,
    ResidualBootstrap,
    ParametricGaussian,
    ParametricT,
    Oracle,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Cb => "cb",
            Method::StandardBootstrap => "standard_bootstrap",
            Method::ResidualBootstrap => "residual_bootstrap",
            Method::ParametricGaussian => "parametric_gaussian",
            Method::ParametricT => "parametric_t",
            Method::Oracle => "oracle",
        }
    }
}

/// Borrowed parameter vectors of a pool.
pub fn thetas_of(pool: &[CandidateDraw]) -> Vec<&[f64]> {
    pool.iter().map(|d| d.theta_star.as_slice()).collect()
}

/// Borrow owned draws.
pub fn as_slices(draws: &[Vec<f64>]) -> Vec<&[f64]> {
    draws.iter().map(Vec::as_slice).collect()
}

/// `q_{1−α}`: the type-1 `(1−α)` quantile of `statistic` over the draws.
pub fn joint_region_threshold<F>(thetas: &[&[f64]], statistic: F, alpha: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if thetas.is_empty() {
        return Err(Error::EmptySample("region threshold from an empty sample".into()));
    }
    let values: Vec<f64> = thetas.iter().map(|t| statistic(t)).collect();
    empirical_quantile(&values, 1.0 - alpha)
}

/// Thresholds for several α from one evaluation of the statistic.
pub fn joint_region_thresholds<F>(thetas: &[&[f64]], statistic: F, alphas: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if thetas.is_empty() {
        return Err(Error::EmptySample("region threshold from an empty sample".into()));
    }
    let values: Vec<f64> = thetas.iter().map(|t| statistic(t)).collect();
    alphas.iter().map(|a| empirical_quantile(&values, 1.0 - a)).collect()
}

/// `θ̂_j ± q` with `q` the `(1−α)` quantile of `|θ*_j − θ̂_j|`.
pub fn marginal_interval(thetas: &[&[f64]], theta_hat: &[f64], j: usize, alpha: f64) -> Result<(f64, f64)> {
    let q = joint_region_threshold(thetas, |t| (t[j] - theta_hat[j]).abs(), alpha)?;
    Ok((theta_hat[j] - q, theta_hat[j] + q))
}

/// Range of coordinate `j` over draws whose `ℓ(y, θ*)` lies within the lowest
/// `1 − α` fraction of pool losses.
pub fn loss_order_interval_coord(pool: &[CandidateDraw], j: usize, alpha: f64) -> Result<(f64, f64)> {
    if pool.is_empty() {
        return Err(Error::EmptySample("loss-order interval from an empty pool".into()));
    }
    let losses: Vec<f64> = pool.iter().map(|d| d.loss_at_data).collect();
    let cut = empirical_quantile(&losses, 1.0 - alpha)?;
    range_where(pool, j, |d| d.loss_at_data <= cut)
}

/// [`loss_order_interval_coord`] for a scalar parameter.
pub fn loss_order_interval(pool: &[CandidateDraw], alpha: f64) -> Result<(f64, f64)> {
    loss_order_interval_coord(pool, 0, alpha)
}

/// Type-1 α-quantile of the pool's contour values; the region keeps draws
/// with `u` at or above it.
pub fn region_threshold_lemma1(pool: &[CandidateDraw], alpha: f64) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::EmptySample("threshold from an empty pool".into()));
    }
    let u: Vec<f64> = pool.iter().map(|d| d.u_value).collect();
    empirical_quantile(&u, alpha)
}

/// Range of coordinate `j` over draws kept by [`region_threshold_lemma1`].
pub fn lemma1_interval(pool: &[CandidateDraw], j: usize, alpha: f64) -> Result<(f64, f64)> {
    let cut = region_threshold_lemma1(pool, alpha)?;
    range_where(pool, j, |d| d.u_value >= cut)
}

fn range_where(pool: &[CandidateDraw], j: usize, keep: impl Fn(&CandidateDraw) -> bool) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for d in pool.iter().filter(|d| keep(d)) {
        lo = lo.min(d.theta_star[j]);
        hi = hi.max(d.theta_star[j]);
    }
    if lo > hi {
        return Err(Error::EmptySample("no draws survive the region filter".into()));
    }
    Ok((lo, hi))
}

/// `(β − β̂)' X'X (β − β̂) / (p·scale)`, evaluated through the R factor.
pub fn quad_form_statistic<'a>(qr: &'a Qr, center: &'a [f64], scale: f64) -> impl Fn(&[f64]) -> f64 + 'a {
    let p = qr.ncols();
    move |beta: &[f64]| {
        let d: Vec<f64> = beta[..p].iter().zip(center).map(|(b, c)| b - c).collect();
        qr.quad_form(&d) / (p as f64 * scale)
    }
}

fn check_count(b: usize) -> Result<()> {
    if b == 0 {
        Err(Error::EmptySample("bootstrap size must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// `m`-out-of-`n` pairs bootstrap estimates (no contour values).
pub fn m_of_n_bootstrap(model: &dyn Model, obs: &Observed, m: usize, b: usize, stream: &RngStream) -> Result<Vec<Vec<f64>>> {
    check_count(b)?;
    (0..b)
        .into_par_iter()
        .map(|i| {
            let st = stream.child(i as u64);
            let boot = resample_m_of_n(&obs.data, m, &mut st.child(0).rng())?;
            match model.fit_near(&boot, &obs.theta_hat) {
                Ok(t) => Ok(t),
                // Same retry-once policy as RA.
                Err(_) => {
                    let boot = resample_m_of_n(&obs.data, m, &mut st.child(1).rng())?;
                    model.fit_near(&boot, &obs.theta_hat)
                }
            }
        })
        .collect()
}

/// Standard (`m = n`) pairs bootstrap.
pub fn standard_bootstrap(model: &dyn Model, obs: &Observed, b: usize, stream: &RngStream) -> Result<Vec<Vec<f64>>> {
    m_of_n_bootstrap(model, obs, obs.n(), b, stream)
}

/// Residual bootstrap around the model's own fit: centered residuals are
/// resampled onto `Xθ̂` and the model is refit.
pub fn residual_bootstrap(model: &dyn Model, obs: &Observed, b: usize, stream: &RngStream) -> Result<Vec<Vec<f64>>> {
    check_count(b)?;
    let x = obs.data.design()?.matrix();
    let p = x.ncols();
    let fitted = x.mul_vec(&obs.theta_hat[..p]);
    let mut resid: Vec<f64> = obs.data.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let mean = resid.iter().sum::<f64>() / resid.len() as f64;
    resid.iter_mut().for_each(|r| *r -= mean);
    let n = resid.len();
    (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let y: Vec<f64> = fitted.iter().map(|f| f + resid[rng.random_range(0..n)]).collect();
            model.fit_near(&obs.data.with_response(y), &obs.theta_hat)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Gaussian,
    /// Multivariate t with `n − p` degrees of freedom.
    StudentT,
}

/// `s² = RSS/(n − p)` of the least-squares fit.
pub fn ols_residual_variance(data: &Dataset) -> Result<(Vec<f64>, f64)> {
    let design = data.design()?;
    let x = design.matrix();
    let (n, p) = (x.nrows(), x.ncols());
    if n <= p {
        return Err(Error::Degenerate(format!("residual variance needs n > p (n = {n}, p = {p})")));
    }
    let beta = design.qr()?.solve(&data.y)?;
    let fit = x.mul_vec(&beta);
    let rss: f64 = data.y.iter().zip(&fit).map(|(a, f)| (a - f) * (a - f)).sum();
    Ok((beta, rss / (n - p) as f64))
}

/// Parametric bootstrap `Y* = Xβ̂ + σ̂ε`, refit by least squares.
pub fn parametric_bootstrap(data: &Dataset, b: usize, noise: Noise, stream: &RngStream) -> Result<Vec<Vec<f64>>> {
    check_count(b)?;
    let design = data.design()?;
    let x = design.matrix();
    let qr = design.qr()?;
    let (n, p) = (x.nrows(), x.ncols());
    let (beta, s2) = ols_residual_variance(data)?;
    let s = s2.sqrt();
    let fitted = x.mul_vec(&beta);
    (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let eps: Vec<f64> = match noise {
                Noise::Gaussian => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
                Noise::StudentT => student_t_vector_sample(n, (n - p) as f64, &mut rng)?,
            };
            let y: Vec<f64> = fitted.iter().zip(&eps).map(|(f, e)| f + s * e).collect();
            qr.solve(&y)
        })
        .collect()
}

/// Exact confidence-distribution draws for linear regression:
/// `N_p(β̂, σ²(X'X)⁻¹)` with known σ, else `t_p(β̂, s²(X'X)⁻¹, n − p)`.
pub fn fiducial_oracle_sample(data: &Dataset, b: usize, known_sigma: Option<f64>, stream: &RngStream) -> Result<Vec<Vec<f64>>> {
    check_count(b)?;
    let design = data.design()?;
    let qr = design.qr()?;
    let p = design.matrix().ncols();
    let n = data.n();
    let (beta, scale, df) = match known_sigma {
        Some(s) => (qr.solve(&data.y)?, s, None),
        None => {
            let (beta, s2) = ols_residual_variance(data)?;
            (beta, s2.sqrt(), Some((n - p) as f64))
        }
    };
    (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let z: Vec<f64> = match df {
                None => (0..p).map(|_| rng.sample(StandardNormal)).collect(),
                Some(df) => student_t_vector_sample(p, df, &mut rng)?,
            };
            let step = qr.r_solve(&z);
            Ok(beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect())
        })
        .collect()
}

/// Per-coordinate intervals, one endpoint pair per α.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateIntervals {
    pub coordinate: usize,
    pub label: String,
    pub endpoints: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub method: Method,
    /// Which construction produced the numbers (e.g. `ra_dr`, `per_alpha_ra`).
    pub path: String,
    pub alpha_grid: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub intervals: Vec<CoordinateIntervals>,
    pub sample_size: usize,
}

impl InferenceReport {
    /// Joint thresholds from `statistic` plus marginal intervals for `coords`.
    pub fn from_draws<F>(
        method: Method,
        path: &str,
        thetas: &[&[f64]],
        statistic: F,
        theta_hat: &[f64],
        alphas: &[f64],
        coords: &[(usize, String)],
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let thresholds = joint_region_thresholds(thetas, statistic, alphas)?;
        let intervals = coords
            .iter()
            .map(|(j, label)| {
                let endpoints = alphas
                    .iter()
                    .map(|&a| marginal_interval(thetas, theta_hat, *j, a))
                    .collect::<Result<_>>()?;
                Ok(CoordinateIntervals { coordinate: *j, label: label.clone(), endpoints })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            method,
            path: path.to_string(),
            alpha_grid: alphas.to_vec(),
            thresholds,
            intervals,
            sample_size: thetas.len(),
        })
    }

    /// Larger confidence (smaller α) never gives a smaller threshold, and
    /// endpoints are ordered.
    pub fn check_nesting(&self) -> bool {
        let mut order: Vec<usize> = (0..self.alpha_grid.len()).collect();
        order.sort_by(|&a, &b| self.alpha_grid[a].total_cmp(&self.alpha_grid[b]));
        let monotone = order.windows(2).all(|w| self.thresholds[w[0]] >= self.thresholds[w[1]]);
        let ordered = self.intervals.iter().all(|c| c.endpoints.iter().all(|(l, h)| l <= h));
        monotone && ordered
    }
}

/// Quantiles of `values` at probabilities `(i − 0.5)/k`, `i = 1..k`.
pub fn plotting_quantiles(values: &[f64], k: usize) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() || k == 0 {
        return Err(Error::EmptySample("quantiles of an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((1..=k)
        .map(|i| {
            let prob = (i as f64 - 0.5) / k as f64;
            (prob, sorted[type1_index(sorted.len(), prob)])
        })
        .collect())
}
