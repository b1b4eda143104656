//! Distributional resampling (DR): pick pool draws whose contour values are
//! nearest to fresh uniforms, so the selected multiset has close to uniform
//! contour values. Also the combined RA-DR pipeline.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{ra_run, CandidateDraw, RaConfig, RaOutcome};
use crate::contour::{Association, Observed};
use crate::error::{Error, Result};
use crate::mathkit::rng::RngStream;
use crate::models::Model;

/// How to choose among pool draws sharing the nearest contour value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Uniformly at random among the tied draws.
    #[default]
    Random,
    /// The tied draw with the smallest pool index.
    LowestIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedSample {
    pub draws: Vec<CandidateDraw>,
    /// Pool position of each selected draw.
    pub pool_indices: Vec<usize>,
    pub source_alphas: Vec<f64>,
    pub b_out: usize,
    /// Kolmogorov–Smirnov distance of the selected contour values from U(0,1).
    pub ks_statistic: f64,
}

impl RefinedSample {
    pub fn u_values(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.u_value).collect()
    }

    pub fn thetas(&self) -> Vec<&[f64]> {
        self.draws.iter().map(|d| d.theta_star.as_slice()).collect()
    }
}

/// Two-sided KS statistic `sup |F̂(u) − u|` against Uniform(0,1).
pub fn ks_uniform(u_values: &[f64]) -> Result<f64> {
    if u_values.is_empty() {
        return Err(Error::EmptySample("KS statistic of an empty sample".into()));
    }
    let mut u = u_values.to_vec();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let mut d = 0.0_f64;
    for (i, &v) in u.iter().enumerate() {
        let v = v.clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / n - v).max(v - i as f64 / n);
    }
    Ok(d)
}

/// Pool indices grouped by distinct contour value, in increasing value order.
struct ValueGroups {
    values: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl ValueGroups {
    fn new(pool: &[CandidateDraw]) -> Self {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| pool[a].u_value.total_cmp(&pool[b].u_value).then(a.cmp(&b)));
        let mut values: Vec<f64> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for i in order {
            let u = pool[i].u_value;
            if values.last() == Some(&u) {
                members.last_mut().expect("group exists").push(i);
            } else {
                values.push(u);
                members.push(vec![i]);
            }
        }
        Self { values, members }
    }

    /// Group whose value is nearest to `u` (the lower one on an exact tie).
    fn nearest(&self, u: f64) -> usize {
        let k = self.values.partition_point(|v| *v < u);
        if k == 0 {
            0
        } else if k == self.values.len() || u - self.values[k - 1] <= self.values[k] - u {
            k - 1
        } else {
            k
        }
    }
}

/// Repeat `b_out` times: draw `u ~ U(0,1)` and select (with replacement) the
/// pool draw whose contour value is nearest to `u`.
pub fn dr_select(pool: &[CandidateDraw], b_out: usize, tie: TieBreak, stream: &RngStream) -> Result<RefinedSample> {
    if pool.is_empty() {
        return Err(Error::EmptySample("DR needs a nonempty pool".into()));
    }
    if pool.iter().any(|d| !(0.0..=1.0).contains(&d.u_value)) {
        return Err(Error::Domain("pool contour values must lie in [0,1]".into()));
    }
    let groups = ValueGroups::new(pool);
    let mut rng = stream.rng();
    let mut pool_indices = Vec::with_capacity(b_out);
    for _ in 0..b_out {
        let u: f64 = rng.random();
        let members = &groups.members[groups.nearest(u)];
        let pick = match tie {
            TieBreak::LowestIndex => members[0],
            TieBreak::Random if members.len() == 1 => members[0],
            TieBreak::Random => members[rng.random_range(0..members.len())],
        };
        pool_indices.push(pick);
    }
    let draws: Vec<CandidateDraw> = pool_indices.iter().map(|&i| pool[i].clone()).collect();
    let u: Vec<f64> = draws.iter().map(|d| d.u_value).collect();
    let ks_statistic = if u.is_empty() { 0.0 } else { ks_uniform(&u)? };
    Ok(RefinedSample { draws, pool_indices, source_alphas: Vec::new(), b_out, ks_statistic })
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub refined: RefinedSample,
    /// One RA run per α, in input order.
    pub runs: Vec<RaOutcome>,
    /// Concatenated draws of all runs, in α order then iteration order.
    pub pool: Vec<CandidateDraw>,
}

/// RA for each α (run `k` on `stream.child(k)`), pool every draw, then DR
/// with `b_out` selections (default: the pool size).
pub fn ra_dr_pipeline(
    model: &dyn Model,
    obs: &Observed,
    assoc: Association,
    alphas: &[f64],
    base: &RaConfig,
    b_out: Option<usize>,
    tie: TieBreak,
    stream: &RngStream,
) -> Result<PipelineOutcome> {
    if alphas.is_empty() {
        return Err(Error::Config("RA-DR needs at least one alpha".into()));
    }
    let runs: Vec<RaOutcome> = alphas
        .par_iter()
        .enumerate()
        .map(|(k, &a)| ra_run(model, obs, assoc, &base.with_alpha(a), &stream.child(k as u64)))
        .collect::<Result<_>>()?;
    let pool: Vec<CandidateDraw> = runs.iter().flat_map(|r| r.pool.iter().cloned()).collect();
    let mut refined = dr_select(&pool, b_out.unwrap_or(pool.len()), tie, &stream.named("dr"))?;
    refined.source_alphas = alphas.to_vec();
    Ok(PipelineOutcome { refined, runs, pool })
}
