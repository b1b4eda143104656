//! Linear regression on a Gaussian design: calibrated bootstrap against the
//! classical bootstraps and the exact fiducial oracle, for the joint region
//! (`lr-joint`) or one coordinate (`lr-marginal`).

use rayon::prelude::*;
use serde::Serialize;

use super::{check_alphas, gaussian_design, positive, run_label, same_levels, Parts, RaSettings};
use crate::calibrate::{ra_run, RaOutcome};
use crate::contour::{Association, Observed};
use crate::error::{Error, Result};
use crate::harness::config::{ten_level_grid, ScenarioConfig, ScenarioKind, SigmaSetting};
use crate::harness::io::{qq_rows, QqRow};
use crate::harness::report::{to_value, trace_rows, CoverageTable, TraceRow};
use crate::inference::{
    as_slices, fiducial_oracle_sample, m_of_n_bootstrap, ols_residual_variance, parametric_bootstrap,
    quad_form_statistic, residual_bootstrap, standard_bootstrap, Noise,
};
use crate::mathkit::rng::RngStream;
use crate::mathkit::special::{chisq_quantile, norm_quantile};
use crate::mathkit::stats::empirical_quantile;
use crate::models::{gaussian_response, Dataset, LinReg};
use crate::refine::{ra_dr_pipeline, TieBreak};

#[derive(Clone, Debug, Serialize)]
struct Settings {
    marginal: bool,
    n: usize,
    p: usize,
    sigma: SigmaSetting,
    /// Every true coefficient equals this value.
    beta_value: f64,
    coordinate: Option<usize>,
    alpha_grid: Vec<f64>,
    pool_alphas: Vec<f64>,
    reps: usize,
    ra: RaSettings,
    draws: usize,
    boot_reps: usize,
    b_out: Option<usize>,
    tie_break: TieBreak,
}

#[derive(Clone, Debug, Serialize)]
struct MethodResult {
    method: &'static str,
    /// Joint: `q_{1−α}` of the scaled quadratic form. Marginal: `q_{1−α}` of
    /// `|β*_j − β̂_j|`, so the interval is `β̂_j ± q`.
    thresholds: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
struct DecileRow {
    prob: f64,
    empirical: f64,
    theoretical: f64,
    rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
struct RepResult {
    rep: usize,
    beta_hat_coordinate: Option<f64>,
    m_alpha: Vec<(f64, usize)>,
    converged: Vec<bool>,
    pool_size: usize,
    refined_size: usize,
    refined_ks: f64,
    truth: Option<Vec<f64>>,
    methods: Vec<MethodResult>,
    refined_deciles: Vec<DecileRow>,
}

struct RepOut {
    result: RepResult,
    /// Per method: per α (hit, size).
    hits: Vec<Vec<(bool, f64)>>,
    qq: Vec<QqRow>,
    trace: Vec<TraceRow>,
}

const METHODS: [&str; 7] = [
    "cb_per_alpha",
    "cb_ra_dr",
    "standard_bootstrap",
    "residual_bootstrap",
    "parametric_gaussian",
    "parametric_t",
    "oracle",
];

pub fn run(cfg: &ScenarioConfig) -> Result<Parts> {
    let seed = cfg.require_seed()?;
    let marginal = cfg.scenario == ScenarioKind::LrMarginal;
    let n = positive("n", cfg.n.unwrap_or(if cfg.full_scale { 500 } else { 200 }))?;
    let p = cfg.resolve_p(n, (0.3 * n as f64).round() as usize)?;
    if p == 0 || p + 2 > n {
        return Err(Error::Config(format!("need 1 <= p <= n - 2, got n = {n}, p = {p}")));
    }
    let alpha_grid = cfg.alpha_grid.clone().unwrap_or_else(ten_level_grid);
    let s = Settings {
        marginal,
        n,
        p,
        sigma: cfg.sigma.unwrap_or(SigmaSetting::Known(1.0)),
        beta_value: cfg.theta.unwrap_or(1.0),
        coordinate: marginal.then(|| cfg.coordinate.unwrap_or(0)),
        pool_alphas: cfg.pool_alphas.clone().unwrap_or_else(|| alpha_grid.clone()),
        alpha_grid,
        reps: cfg.resolve_reps(1)?,
        ra: RaSettings::resolve(&cfg.ra, 99, 1.0, 5000),
        draws: positive("draws", cfg.draws.unwrap_or(1000))?,
        boot_reps: positive("boot_reps", cfg.boot_reps.unwrap_or(1000))?,
        b_out: cfg.b_out,
        tie_break: cfg.tie_break.unwrap_or_default(),
    };
    check_alphas(&s.alpha_grid)?;
    check_alphas(&s.pool_alphas)?;
    if let Some(j) = s.coordinate {
        if j >= p {
            return Err(Error::Config(format!("coordinate {j} out of range for p = {p}")));
        }
    }
    if let SigmaSetting::Known(v) = s.sigma {
        if !(v > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {v}")));
        }
    }

    let root = RngStream::new(seed);
    let outs: Vec<RepOut> = (0..s.reps)
        .into_par_iter()
        .map(|r| one_rep(&s, r, &root.child(r as u64)))
        .collect::<Result<_>>()?;

    let mut coverage = CoverageTable::default();
    let setting = format!("n={},p={}", s.n, s.p);
    for (mi, method) in METHODS.iter().enumerate() {
        for (k, &a) in s.alpha_grid.iter().enumerate() {
            let (hits, sizes): (Vec<bool>, Vec<f64>) = outs.iter().map(|o| o.hits[mi][k]).unzip();
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
    let results = serde_json::json!({
        "statistic": if marginal { "abs_coordinate_deviation" } else { "quadratic_form_over_p" },
        "paths": {
            "cb_per_alpha": "one RA run per alpha; fresh m-out-of-n sample at the calibrated m",
            "cb_ra_dr": "RA over pool_alphas, all draws pooled, DR refined sample",
        },
        "labels": { "residual_bootstrap": "residual (non-debiased)" },
        "reps": reps,
    });
    Ok(Parts {
        seed,
        config: to_value(&s)?,
        results,
        coverage: Some(coverage),
        qq,
        trace,
        extra: Vec::new(),
    })
}

fn one_rep(s: &Settings, rep: usize, stream: &RngStream) -> Result<RepOut> {
    let x = gaussian_design(s.n, s.p, &stream.named("design"))?;
    let beta = vec![s.beta_value; s.p];
    let (model, sigma_true) = match s.sigma {
        SigmaSetting::Known(v) => (LinReg::known(v)?, v),
        SigmaSetting::Unknown => (LinReg::unknown(), 1.0),
    };
    let y = gaussian_response(&x, &beta, sigma_true, &mut stream.named("noise").rng());
    let data = Dataset::regression(x, y, "lr")?;
    let obs = Observed::fit(&model, data)?;
    let design = obs.data.design()?;
    let qr = design.qr()?;
    let assoc = match s.coordinate {
        Some(j) => Association::Profile { index: j },
        None => Association::Joint,
    };
    let known = match s.sigma {
        SigmaSetting::Known(v) => Some(v),
        SigmaSetting::Unknown => None,
    };
    let scale2 = match known {
        Some(v) => v * v,
        None => ols_residual_variance(&obs.data)?.1,
    };
    let beta_hat = obs.theta_hat[..s.p].to_vec();
    let quad = quad_form_statistic(qr, &beta_hat, scale2);
    let statistic = |t: &[f64]| -> f64 {
        match s.coordinate {
            Some(j) => (t[j] - beta_hat[j]).abs(),
            None => quad(t),
        }
    };
    // Oracle quantile of the statistic at probability `prob`, known σ only.
    let oracle_q = |prob: f64| -> Result<f64> {
        let sigma = known.ok_or_else(|| Error::Config("oracle needs a known sigma".into()))?;
        match s.coordinate {
            Some(j) => Ok(sigma * qr.xtx_inv_col(j)[j].sqrt() * norm_quantile(0.5 + 0.5 * prob)?),
            None => Ok(chisq_quantile(prob, s.p as f64)? / s.p as f64),
        }
    };

    // Calibrated bootstrap: RA-DR over the pool levels; per-α runs reuse
    // those runs when the level sets coincide.
    let base = s.ra.config(s.n, s.p, s.pool_alphas[0])?;
    let cb = ra_dr_pipeline(&model, &obs, assoc, &s.pool_alphas, &base, s.b_out, s.tie_break, &stream.named("cb"))?;
    let per_alpha_runs: Vec<RaOutcome> = if same_levels(&s.alpha_grid, &s.pool_alphas) {
        cb.runs.clone()
    } else {
        s.alpha_grid
            .par_iter()
            .enumerate()
            .map(|(k, &a)| ra_run(&model, &obs, assoc, &base.with_alpha(a), &stream.named("ra").child(k as u64)))
            .collect::<Result<_>>()?
    };
    let mut per_alpha = Vec::with_capacity(s.alpha_grid.len());
    for (k, (run, &a)) in per_alpha_runs.iter().zip(&s.alpha_grid).enumerate() {
        let draws = m_of_n_bootstrap(&model, &obs, run.m_alpha, s.draws, &stream.named("fresh").child(k as u64))?;
        let values: Vec<f64> = draws.iter().map(|t| statistic(t)).collect();
        per_alpha.push(empirical_quantile(&values, 1.0 - a)?);
    }

    let refined_values: Vec<f64> = cb.refined.thetas().iter().map(|t| statistic(t)).collect();
    let samples: Vec<(&str, Vec<f64>)> = vec![
        ("standard_bootstrap", standard_bootstrap(&model, &obs, s.boot_reps, &stream.named("standard"))?),
        ("residual_bootstrap", residual_bootstrap(&model, &obs, s.boot_reps, &stream.named("residual"))?),
        ("parametric_gaussian", parametric_bootstrap(&obs.data, s.boot_reps, Noise::Gaussian, &stream.named("param_gauss"))?),
        ("parametric_t", parametric_bootstrap(&obs.data, s.boot_reps, Noise::StudentT, &stream.named("param_t"))?),
        ("oracle", fiducial_oracle_sample(&obs.data, s.boot_reps, known, &stream.named("oracle"))?),
    ]
    .into_iter()
    .map(|(name, draws)| (name, as_slices(&draws).iter().map(|t| statistic(t)).collect()))
    .collect();

    let quantiles = |values: &[f64]| -> Result<Vec<f64>> {
        s.alpha_grid.iter().map(|a| empirical_quantile(values, 1.0 - a)).collect()
    };
    let mut methods = vec![
        MethodResult { method: METHODS[0], thresholds: per_alpha },
        MethodResult { method: METHODS[1], thresholds: quantiles(&refined_values)? },
    ];
    for (name, values) in &samples {
        let method = METHODS.iter().find(|m| *m == name).copied().expect("known method");
        methods.push(MethodResult { method, thresholds: quantiles(values)? });
    }

    // Coverage of the true coefficients.
    let t_true = statistic(&beta);
    let hits = methods
        .iter()
        .map(|m| {
            m.thresholds
                .iter()
                .map(|&q| (t_true <= q, if s.coordinate.is_some() { 2.0 * q } else { q }))
                .collect()
        })
        .collect();

    let truth = match known {
        Some(_) => Some(s.alpha_grid.iter().map(|a| oracle_q(1.0 - a)).collect::<Result<Vec<_>>>()?),
        None => None,
    };
    let mut refined_deciles = Vec::new();
    let mut qq = Vec::new();
    if known.is_some() {
        for k in 1..10 {
            let prob = k as f64 / 10.0;
            let empirical = empirical_quantile(&refined_values, prob)?;
            let theoretical = oracle_q(prob)?;
            refined_deciles.push(DecileRow { prob, empirical, theoretical, rel_error: empirical / theoretical - 1.0 });
        }
        if rep == 0 {
            qq.extend(qq_rows("cb_ra_dr", &refined_values, oracle_q, 100)?);
            for (name, values) in &samples {
                qq.extend(qq_rows(name, values, oracle_q, 100)?);
            }
        }
    }

    let mut trace = Vec::new();
    for run in cb.runs.iter() {
        trace.extend(trace_rows(&run_label(rep, "cb", run.trace.alpha), &run.trace));
    }
    if !same_levels(&s.alpha_grid, &s.pool_alphas) {
        for run in &per_alpha_runs {
            trace.extend(trace_rows(&run_label(rep, "ra", run.trace.alpha), &run.trace));
        }
    }

    Ok(RepOut {
        result: RepResult {
            rep,
            beta_hat_coordinate: s.coordinate.map(|j| beta_hat[j]),
            m_alpha: per_alpha_runs.iter().map(|r| (r.trace.alpha, r.m_alpha)).collect(),
            converged: per_alpha_runs.iter().map(|r| r.trace.converged).collect(),
            pool_size: cb.pool.len(),
            refined_size: cb.refined.draws.len(),
            refined_ks: cb.refined.ks_statistic,
            truth,
            methods,
            refined_deciles,
        },
        hits,
        qq,
        trace,
    })
}

