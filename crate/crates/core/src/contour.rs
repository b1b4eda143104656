//! Association function `T_{y,θ} = ℓ(y, θ̂_y) − ℓ(y, θ)`, its profile form,
//! and contour values `F_θ(T_{y,θ})` by Monte Carlo or in closed form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathkit::rng::RngStream;
use crate::mathkit::special::{chisq_sf, norm_cdf};
use crate::models::{Dataset, Model};

/// Replicate counts at or above this run on the rayon pool.
const PAR_MIN_REPLICATES: usize = 32;

/// Which association statistic to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Association {
    /// Full-parameter loss gap.
    Joint,
    /// Loss gap with all coordinates but `index` minimized out.
    Profile { index: usize },
}

/// Observed data together with its cached minimizer and minimum loss.
#[derive(Clone, Debug)]
pub struct Observed {
    pub data: Dataset,
    pub theta_hat: Vec<f64>,
    pub min_loss: f64,
}

impl Observed {
    pub fn fit(model: &dyn Model, data: Dataset) -> Result<Self> {
        let theta_hat = model.fit(&data)?;
        let min_loss = model.loss(&data, &theta_hat);
        Ok(Self { data, theta_hat, min_loss })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourValue {
    pub theta: Vec<f64>,
    pub t_value: f64,
    pub u_value: f64,
    pub n_mc: usize,
}

// Solver slack can leave a gap a hair above zero; the exact gap is <= 0.
fn gap(min_loss: f64, loss: f64) -> f64 {
    (min_loss - loss).min(0.0)
}

pub fn t_stat(model: &dyn Model, obs: &Observed, theta: &[f64]) -> f64 {
    gap(obs.min_loss, model.loss(&obs.data, theta))
}

pub fn t_stat_profile(model: &dyn Model, obs: &Observed, j: usize, value: f64) -> Result<f64> {
    let pinned = model.profile_fit_near(&obs.data, j, value, &obs.theta_hat)?;
    Ok(gap(obs.min_loss, model.loss(&obs.data, &pinned)))
}

/// Observed association at `theta`.
pub fn association(model: &dyn Model, obs: &Observed, assoc: Association, theta: &[f64]) -> Result<f64> {
    match assoc {
        Association::Joint => Ok(t_stat(model, obs, theta)),
        Association::Profile { index } => {
            let value = *theta
                .get(index)
                .ok_or_else(|| Error::Domain(format!("profile index {index} out of range")))?;
            t_stat_profile(model, obs, index, value)
        }
    }
}

/// Association of a freshly drawn dataset at `theta` (fits the dataset first).
pub fn association_fresh(model: &dyn Model, data: &Dataset, assoc: Association, theta: &[f64]) -> Result<f64> {
    let hat = model.fit_near(data, theta)?;
    let min_loss = model.loss(data, &hat);
    let loss = match assoc {
        Association::Joint => model.loss(data, theta),
        Association::Profile { index } => {
            let pinned = model.profile_fit_near(data, index, theta[index], &hat)?;
            model.loss(data, &pinned)
        }
    };
    Ok(gap(min_loss, loss))
}

/// One replicate: simulate from `P_θ` on the observed template and report
/// whether its association is at or below `threshold`.
pub fn replicate_indicator(
    model: &dyn Model,
    template: &Dataset,
    assoc: Association,
    theta: &[f64],
    threshold: f64,
    stream: &RngStream,
) -> Result<bool> {
    let mut rng = stream.rng();
    let sim = model.simulate(theta, template, &mut rng)?;
    Ok(association_fresh(model, &sim, assoc, theta)? <= threshold)
}

/// Number of replicates `i < count` (stream `stream.child(i)`) whose
/// association is at or below `threshold`.
pub fn count_at_or_below(
    model: &dyn Model,
    template: &Dataset,
    assoc: Association,
    theta: &[f64],
    threshold: f64,
    count: usize,
    stream: &RngStream,
) -> Result<usize> {
    let one = |i: usize| replicate_indicator(model, template, assoc, theta, threshold, &stream.child(i as u64));
    if count >= PAR_MIN_REPLICATES {
        let hits: Vec<bool> = (0..count).into_par_iter().map(one).collect::<Result<_>>()?;
        Ok(hits.into_iter().filter(|h| *h).count())
    } else {
        let mut hits = 0;
        for i in 0..count {
            hits += usize::from(one(i)?);
        }
        Ok(hits)
    }
}

/// Monte-Carlo contour value `(1/N) Σ 𝟙(T_{y⁽ⁱ⁾,θ} ≤ T_{y,θ})`.
pub fn contour_mc(
    model: &dyn Model,
    obs: &Observed,
    assoc: Association,
    theta: &[f64],
    n_mc: usize,
    stream: &RngStream,
) -> Result<ContourValue> {
    if n_mc == 0 {
        return Err(Error::Domain("contour needs at least one replicate".into()));
    }
    let t_value = association(model, obs, assoc, theta)?;
    let hits = count_at_or_below(model, &obs.data, assoc, theta, t_value, n_mc, stream)?;
    Ok(ContourValue { theta: theta.to_vec(), t_value, u_value: hits as f64 / n_mc as f64, n_mc })
}

fn check_t(t: f64) -> Result<()> {
    if t <= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("association values are <= 0, got {t}")))
    }
}

/// Exact contour for the unit-variance Gaussian mean: `2Φ(−√(−2t))`.
pub fn contour_exact_mean(t: f64) -> Result<f64> {
    check_t(t)?;
    Ok(2.0 * norm_cdf(-(-2.0 * t).sqrt()))
}

/// Exact contour for known-σ linear regression: `P(χ²_p ≥ −2t/σ²)`, with `t`
/// on the scale of `−½(β̂−β)'X'X(β̂−β)`. [`LinReg`](crate::models::LinReg)
/// already divides its loss by σ², so its association values take `σ² = 1`.
pub fn contour_exact_linreg_known_sigma(t: f64, p: usize, sigma2: f64) -> Result<f64> {
    check_t(t)?;
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    chisq_sf(-2.0 * t / sigma2, p as f64)
}
