//! Gaussian mean with unit variance: RA at each α, then a fresh pool at the
//! calibrated `m` turned into loss-order and contour-threshold intervals.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{check_alphas, positive, run_label, Parts, RaSettings};
use crate::calibrate::{fixed_m_pool, ra_run};
use crate::contour::{Association, Observed};
use crate::error::Result;
use crate::harness::config::ScenarioConfig;
use crate::harness::io::{qq_rows, QqRow};
use crate::harness::report::{to_value, trace_rows, CoverageTable, TraceRow};
use crate::inference::{lemma1_interval, loss_order_interval};
use crate::mathkit::rng::RngStream;
use crate::mathkit::special::norm_quantile;
use crate::models::{Dataset, GaussianMean};

#[derive(Clone, Debug, Serialize)]
struct Settings {
    n: usize,
    theta: f64,
    alpha_grid: Vec<f64>,
    reps: usize,
    ra: RaSettings,
    draws: usize,
}

#[derive(Clone, Debug, Serialize)]
struct AlphaResult {
    alpha: f64,
    m_alpha: usize,
    m_final_real: f64,
    converged: bool,
    loss_order: (f64, f64),
    lemma1: (f64, f64),
    exact: (f64, f64),
    /// Largest endpoint distance of the loss-order interval from the exact one.
    max_endpoint_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
struct RepResult {
    rep: usize,
    y_bar: f64,
    per_alpha: Vec<AlphaResult>,
}

struct RepOut {
    result: RepResult,
    qq: Vec<QqRow>,
    trace: Vec<TraceRow>,
}

pub fn run(cfg: &ScenarioConfig) -> Result<Parts> {
    let seed = cfg.require_seed()?;
    let s = Settings {
        n: positive("n", cfg.n.unwrap_or(50))?,
        theta: cfg.theta.unwrap_or(1.0),
        alpha_grid: cfg.alpha_grid.clone().unwrap_or_else(|| vec![0.05]),
        reps: cfg.resolve_reps(1)?,
        ra: RaSettings::resolve(&cfg.ra, 19, 10.0, 50_000),
        draws: positive("draws", cfg.draws.unwrap_or(2000))?,
    };
    check_alphas(&s.alpha_grid)?;
    let root = RngStream::new(seed);
    let outs: Vec<RepOut> = (0..s.reps)
        .into_par_iter()
        .map(|r| one_rep(&s, r, &root.child(r as u64)))
        .collect::<Result<_>>()?;

    let mut coverage = CoverageTable::default();
    let setting = format!("n={}", s.n);
    for (k, &a) in s.alpha_grid.iter().enumerate() {
        for method in ["cb_loss_order", "cb_lemma1", "exact"] {
            let (hits, sizes): (Vec<bool>, Vec<f64>) = outs
                .iter()
                .map(|o| {
                    let r = &o.result.per_alpha[k];
                    let (lo, hi) = match method {
                        "cb_loss_order" => r.loss_order,
                        "cb_lemma1" => r.lemma1,
                        _ => r.exact,
                    };
                    (lo <= s.theta && s.theta <= hi, hi - lo)
                })
                .unzip();
            coverage.push(&setting, a, method, &hits, &sizes)?;
        }
    }
    let mut qq = Vec::new();
    let mut trace = Vec::new();
    let mut reps = Vec::new();
    for (i, o) in outs.into_iter().enumerate() {
        if i == 0 {
            qq = o.qq;
        }
        trace.extend(o.trace);
        reps.push(o.result);
    }
    Ok(Parts {
        seed,
        config: to_value(&s)?,
        results: to_value(&serde_json::json!({ "reps": reps }))?,
        coverage: Some(coverage),
        qq,
        trace,
        extra: Vec::new(),
    })
}

fn one_rep(s: &Settings, rep: usize, stream: &RngStream) -> Result<RepOut> {
    let model = GaussianMean::new(1.0)?;
    let mut rng = stream.named("data").rng();
    let y: Vec<f64> = (0..s.n).map(|_| s.theta + rng.sample::<f64, _>(StandardNormal)).collect();
    let obs = Observed::fit(&model, Dataset::scalar(y, "mean"))?;
    let y_bar = obs.theta_hat[0];
    let mut per_alpha = Vec::new();
    let mut qq = Vec::new();
    let mut trace = Vec::new();
    for (k, &a) in s.alpha_grid.iter().enumerate() {
        let config = s.ra.config(s.n, 1, a)?;
        let out = ra_run(&model, &obs, Association::Joint, &config, &stream.named("ra").child(k as u64))?;
        let pool = fixed_m_pool(
            &model,
            &obs,
            Association::Joint,
            out.m_alpha,
            s.draws,
            s.ra.inner_reps,
            &stream.named("pool").child(k as u64),
        )?;
        let loss_order = loss_order_interval(&pool, a)?;
        let lemma1 = lemma1_interval(&pool, 0, a)?;
        let half = norm_quantile(1.0 - a / 2.0)? / (s.n as f64).sqrt();
        let exact = (y_bar - half, y_bar + half);
        if rep == 0 {
            let thetas: Vec<f64> = pool.iter().map(|d| d.theta_star[0]).collect();
            let sd = 1.0 / (s.n as f64).sqrt();
            qq.extend(qq_rows(&format!("cb_alpha{a}"), &thetas, |p| Ok(y_bar + sd * norm_quantile(p)?), 100)?);
        }
        trace.extend(trace_rows(&run_label(rep, "ra", a), &out.trace));
        per_alpha.push(AlphaResult {
            alpha: a,
            m_alpha: out.m_alpha,
            m_final_real: out.trace.m_final_real,
            converged: out.trace.converged,
            loss_order,
            lemma1,
            exact,
            max_endpoint_gap: (loss_order.0 - exact.0).abs().max((loss_order.1 - exact.1).abs()),
        });
    }
    Ok(RepOut { result: RepResult { rep, y_bar, per_alpha }, qq, trace })
}
