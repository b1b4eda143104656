//! Lasso: a coverage simulation (`lasso-sim`) and the diabetes data
//! (`lasso-diabetes`).

use rayon::prelude::*;
use serde::Serialize;

use super::{check_alphas, gaussian_design, positive, run_label, Parts, RaSettings};
use crate::contour::{Association, Observed};
use crate::error::{Error, Result};
use crate::harness::config::{LambdaSetting, ScenarioConfig};
use crate::harness::cv::{cv_lambda, log_grid, CvResult};
use crate::harness::io::{ingest_csv, qq_rows, CsvSchema, QqRow};
use crate::harness::report::{to_value, trace_rows, CoverageTable, TraceRow};
use crate::inference::{
    as_slices, joint_region_thresholds, marginal_interval, ols_residual_variance, residual_bootstrap,
    standard_bootstrap,
};
use crate::mathkit::lasso::{lasso_fit, reid_sigma2};
use crate::mathkit::linalg::{DesignMatrix, Standardization};
use crate::mathkit::rng::RngStream;
use crate::models::{gaussian_response, Dataset, Lasso};
use crate::refine::{ra_dr_pipeline, PipelineOutcome, TieBreak};

const CV_FOLDS: usize = 10;

fn cv_grid() -> Vec<f64> {
    log_grid(10.0, 2000.0, 50)
}

/// `(β − b)' G (β − b) / p` for a dense Gram matrix `G`.
fn gram_quad(gram: &[f64], center: &[f64], beta: &[f64]) -> f64 {
    let p = center.len();
    let d: Vec<f64> = beta[..p].iter().zip(center).map(|(a, b)| a - b).collect();
    let mut acc = 0.0;
    for a in 0..p {
        if d[a] == 0.0 {
            continue;
        }
        let row = &gram[a * p..(a + 1) * p];
        acc += d[a] * row.iter().zip(&d).map(|(g, v)| g * v).sum::<f64>();
    }
    acc / p as f64
}

#[derive(Clone, Debug, Serialize)]
struct PipelineSummary {
    m_alpha: Vec<(f64, usize)>,
    pool_size: usize,
    refined_ks: f64,
}

fn summarize(out: &PipelineOutcome) -> PipelineSummary {
    PipelineSummary {
        m_alpha: out.runs.iter().map(|r| (r.trace.alpha, r.m_alpha)).collect(),
        pool_size: out.pool.len(),
        refined_ks: out.refined.ks_statistic,
    }
}

fn pipeline_traces(rep: usize, part: &str, out: &PipelineOutcome) -> Vec<TraceRow> {
    out.runs
        .iter()
        .flat_map(|r| trace_rows(&run_label(rep, part, r.trace.alpha), &r.trace))
        .collect()
}

// ---------------------------------------------------------------- simulation

#[derive(Clone, Debug, Serialize)]
struct SimSettings {
    n: usize,
    p: usize,
    lambda: LambdaSetting,
    signal: f64,
    noise_sd: f64,
    coordinate: usize,
    alpha_grid: Vec<f64>,
    pool_alphas: Vec<f64>,
    reps: usize,
    ra: RaSettings,
    boot_reps: usize,
    b_out: Option<usize>,
    tie_break: TieBreak,
}

#[derive(Clone, Debug, Serialize)]
struct SimRep {
    rep: usize,
    sigma2: f64,
    support_size: usize,
    beta_hat_coordinate: f64,
    joint: PipelineSummary,
    marginal: PipelineSummary,
}

struct SimOut {
    result: SimRep,
    hits: Vec<Vec<(bool, f64)>>,
    qq: Vec<QqRow>,
    trace: Vec<TraceRow>,
}

const SIM_METHODS: [&str; 6] = [
    "cb_joint",
    "standard_bootstrap_joint",
    "residual_bootstrap_joint",
    "cb_marginal",
    "standard_bootstrap_marginal",
    "residual_bootstrap_marginal",
];

/// Default penalty per `n` (desk scale and the two larger settings).
fn default_lambda(n: usize) -> f64 {
    match n {
        200 => 40.2,
        500 => 63.1,
        _ => 20.1,
    }
}

/// One simulated dataset: standard normal design, columns standardized,
/// `β = (signal, 0, …, 0)` and noise `N(0, noise_sd²)`. Returns the data and `β`.
pub fn simulate_dataset(n: usize, p: usize, signal: f64, noise_sd: f64, stream: &RngStream) -> Result<(Dataset, Vec<f64>)> {
    let mut x = gaussian_design(n, p, &stream.named("design"))?;
    x.standardize(Standardization::Sample)?;
    let mut beta = vec![0.0; p];
    beta[0] = signal;
    let y = gaussian_response(&x, &beta, noise_sd, &mut stream.named("noise").rng());
    Ok((Dataset::regression(x, y, "lasso-sim")?, beta))
}

fn sim_data(s: &SimSettings, stream: &RngStream) -> Result<(Dataset, Vec<f64>)> {
    simulate_dataset(s.n, s.p, s.signal, s.noise_sd, stream)
}

pub fn run_sim(cfg: &ScenarioConfig) -> Result<Parts> {
    let seed = cfg.require_seed()?;
    let n = positive("n", cfg.n.unwrap_or(100))?;
    let default_p = match n {
        200 => 100,
        500 => 450,
        _ => (0.3 * n as f64).round() as usize,
    };
    let p = cfg.resolve_p(n, default_p)?;
    if p == 0 || p >= n {
        return Err(Error::Config(format!("need 1 <= p < n, got n = {n}, p = {p}")));
    }
    let s = SimSettings {
        n,
        p,
        lambda: cfg.lambda.unwrap_or(LambdaSetting::Value(default_lambda(n))),
        signal: cfg.theta.unwrap_or(3.0),
        noise_sd: match cfg.sigma {
            Some(crate::harness::config::SigmaSetting::Known(v)) => v,
            Some(crate::harness::config::SigmaSetting::Unknown) | None => 1.0,
        },
        coordinate: 0,
        alpha_grid: cfg.alpha_grid.clone().unwrap_or_else(|| vec![0.05, 0.15, 0.25]),
        pool_alphas: cfg.pool_alphas.clone().unwrap_or_else(|| vec![0.05, 0.5, 0.95]),
        reps: cfg.resolve_reps(if cfg.full_scale { 500 } else { 200 })?,
        ra: RaSettings::resolve(&cfg.ra, 99, 1.0, 100),
        boot_reps: positive("boot_reps", cfg.boot_reps.unwrap_or(1000))?,
        b_out: cfg.b_out,
        tie_break: cfg.tie_break.unwrap_or_default(),
    };
    check_alphas(&s.alpha_grid)?;
    check_alphas(&s.pool_alphas)?;
    let root = RngStream::new(seed);

    // A cross-validated penalty is chosen once, on the first replication.
    let (lambda, cv): (f64, Option<CvResult>) = match s.lambda {
        LambdaSetting::Value(v) => (v, None),
        LambdaSetting::Cv => {
            let (data, _) = sim_data(&s, &root.child(0))?;
            let x = data.design()?.matrix();
            let r = cv_lambda(x, &data.y, CV_FOLDS, &cv_grid(), &root.named("cv"))?;
            (r.lambda, Some(r))
        }
    };

    let outs: Vec<SimOut> = (0..s.reps)
        .into_par_iter()
        .map(|r| sim_rep(&s, lambda, r, &root.child(r as u64)))
        .collect::<Result<_>>()?;

    let mut coverage = CoverageTable::default();
    let setting = format!("n={},p={},lambda={}", s.n, s.p, lambda);
    for (mi, method) in SIM_METHODS.iter().enumerate() {
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
        "lambda": lambda,
        "cv": cv,
        "labels": {
            "residual_bootstrap_joint": "residual (non-debiased)",
            "residual_bootstrap_marginal": "residual (non-debiased)",
        },
        "coverage": coverage.rows,
        "reps": reps,
    });
    Ok(Parts { seed, config: to_value(&s)?, results, coverage: Some(coverage), qq, trace, extra: Vec::new() })
}

fn sim_rep(s: &SimSettings, lambda: f64, rep: usize, stream: &RngStream) -> Result<SimOut> {
    let (data, beta) = sim_data(s, stream)?;
    let x = data.design()?.matrix();
    let pilot = lasso_fit(x, &data.y, lambda)?;
    let sigma2 = reid_sigma2(x, &data.y, &pilot)?;
    let model = Lasso::new(lambda, sigma2)?;
    let obs = Observed::fit(&model, data)?;
    let gram = obs.data.design()?.gram().to_vec();
    let beta_hat = obs.theta_hat.clone();
    let j = s.coordinate;
    let joint_stat = |t: &[f64]| gram_quad(&gram, &beta_hat, t);

    let base = s.ra.config(s.n, s.p, s.pool_alphas[0])?;
    let joint = ra_dr_pipeline(&model, &obs, Association::Joint, &s.pool_alphas, &base, s.b_out, s.tie_break, &stream.named("cb_joint"))?;
    let marginal = ra_dr_pipeline(
        &model,
        &obs,
        Association::Profile { index: j },
        &s.pool_alphas,
        &base,
        s.b_out,
        s.tie_break,
        &stream.named("cb_marginal"),
    )?;
    let standard = standard_bootstrap(&model, &obs, s.boot_reps, &stream.named("standard"))?;
    let residual = residual_bootstrap(&model, &obs, s.boot_reps, &stream.named("residual"))?;

    let t_true = joint_stat(&beta);
    let joint_hits = |thetas: &[&[f64]]| -> Result<Vec<(bool, f64)>> {
        Ok(joint_region_thresholds(thetas, joint_stat, &s.alpha_grid)?
            .into_iter()
            .map(|q| (t_true <= q, q))
            .collect())
    };
    let marginal_hits = |thetas: &[&[f64]]| -> Result<Vec<(bool, f64)>> {
        s.alpha_grid
            .iter()
            .map(|&a| {
                let (lo, hi) = marginal_interval(thetas, &beta_hat, j, a)?;
                Ok((lo <= beta[j] && beta[j] <= hi, hi - lo))
            })
            .collect()
    };
    let hits = vec![
        joint_hits(&joint.refined.thetas())?,
        joint_hits(&as_slices(&standard))?,
        joint_hits(&as_slices(&residual))?,
        marginal_hits(&marginal.refined.thetas())?,
        marginal_hits(&as_slices(&standard))?,
        marginal_hits(&as_slices(&residual))?,
    ];

    let mut qq = Vec::new();
    if rep == 0 {
        qq.extend(qq_rows("cb_joint_u", &joint.refined.u_values(), Ok, 100)?);
        qq.extend(qq_rows("cb_marginal_u", &marginal.refined.u_values(), Ok, 100)?);
    }
    let mut trace = pipeline_traces(rep, "joint", &joint);
    trace.extend(pipeline_traces(rep, "marginal", &marginal));
    Ok(SimOut {
        result: SimRep {
            rep,
            sigma2,
            support_size: beta_hat.iter().filter(|b| **b != 0.0).count(),
            beta_hat_coordinate: beta_hat[j],
            joint: summarize(&joint),
            marginal: summarize(&marginal),
        },
        hits,
        qq,
        trace,
    })
}

// ------------------------------------------------------------------ diabetes

#[derive(Clone, Debug, Serialize)]
struct DiabetesSettings {
    data: String,
    data_sha256: String,
    lambda: LambdaSetting,
    alpha_grid: Vec<f64>,
    pool_alphas: Vec<f64>,
    ra: RaSettings,
    boot_reps: usize,
    b_out: Option<usize>,
    tie_break: TieBreak,
}

#[derive(Clone, Debug, Serialize)]
struct IntervalSet {
    alpha: f64,
    cb: (f64, f64),
    standard_bootstrap: (f64, f64),
    residual_bootstrap: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
struct VariableRow {
    variable: String,
    index: usize,
    estimate: f64,
    /// First α level's CB interval contains 0.
    cb_contains_zero: bool,
    cb: PipelineSummary,
    intervals: Vec<IntervalSet>,
}

pub fn run_diabetes(cfg: &ScenarioConfig) -> Result<Parts> {
    let seed = cfg.require_seed()?;
    let path = cfg
        .data
        .clone()
        .ok_or_else(|| Error::Config("lasso-diabetes needs --data <csv>".into()))?;
    let bytes = std::fs::read(&path)?;
    let sha: String = {
        use sha2::{Digest, Sha256};
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    };
    let schema = CsvSchema::diabetes();
    let ing = ingest_csv(&path, &schema)?;
    let s = DiabetesSettings {
        data: path.display().to_string(),
        data_sha256: sha,
        lambda: cfg.lambda.unwrap_or(LambdaSetting::Value(520.0)),
        alpha_grid: cfg.alpha_grid.clone().unwrap_or_else(|| vec![0.05]),
        pool_alphas: cfg.pool_alphas.clone().unwrap_or_else(|| vec![0.05, 0.5, 0.95]),
        ra: RaSettings::resolve(&cfg.ra, 99, 1.0, 200),
        boot_reps: positive("boot_reps", cfg.boot_reps.unwrap_or(1000))?,
        b_out: cfg.b_out,
        tie_break: cfg.tie_break.unwrap_or_default(),
    };
    check_alphas(&s.alpha_grid)?;
    check_alphas(&s.pool_alphas)?;
    let root = RngStream::new(seed);
    let data = ing.data;
    let x: &DesignMatrix = data.design()?.matrix();
    let (n, p) = (x.nrows(), x.ncols());

    let (lambda, cv) = match s.lambda {
        LambdaSetting::Value(v) => (v, None),
        LambdaSetting::Cv => {
            let r = cv_lambda(x, &data.y, CV_FOLDS, &cv_grid(), &root.named("cv"))?;
            (r.lambda, Some(r))
        }
    };
    // The response is centered, which uses one more degree of freedom.
    let (_, s2_ols) = ols_residual_variance(&data)?;
    let sigma2 = s2_ols * (n - p) as f64 / (n - p - 1) as f64;
    let model = Lasso::new(lambda, sigma2)?;
    let obs = Observed::fit(&model, data)?;
    let selected: Vec<usize> = (0..p).filter(|&j| obs.theta_hat[j] != 0.0).collect();

    let standard = standard_bootstrap(&model, &obs, s.boot_reps, &root.named("standard"))?;
    let residual = residual_bootstrap(&model, &obs, s.boot_reps, &root.named("residual"))?;
    let base = s.ra.config(n, p, s.pool_alphas[0])?;
    let pipelines: Vec<PipelineOutcome> = selected
        .par_iter()
        .map(|&j| {
            ra_dr_pipeline(
                &model,
                &obs,
                Association::Profile { index: j },
                &s.pool_alphas,
                &base,
                s.b_out,
                s.tie_break,
                &root.named("cb").child(j as u64),
            )
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut qq = Vec::new();
    let mut trace = Vec::new();
    for (&j, out) in selected.iter().zip(&pipelines) {
        let name = &ing.names[j];
        let intervals = s
            .alpha_grid
            .iter()
            .map(|&a| {
                Ok(IntervalSet {
                    alpha: a,
                    cb: marginal_interval(&out.refined.thetas(), &obs.theta_hat, j, a)?,
                    standard_bootstrap: marginal_interval(&as_slices(&standard), &obs.theta_hat, j, a)?,
                    residual_bootstrap: marginal_interval(&as_slices(&residual), &obs.theta_hat, j, a)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (lo, hi) = intervals[0].cb;
        qq.extend(qq_rows(&format!("cb_{name}_u"), &out.refined.u_values(), Ok, 100)?);
        trace.extend(out.runs.iter().flat_map(|r| trace_rows(&format!("{name}/alpha{}", r.trace.alpha), &r.trace)));
        rows.push(VariableRow {
            variable: name.clone(),
            index: j,
            estimate: obs.theta_hat[j],
            cb_contains_zero: lo <= 0.0 && 0.0 <= hi,
            cb: summarize(out),
            intervals,
        });
    }
    let results = serde_json::json!({
        "n": n,
        "p": p,
        "lambda": lambda,
        "cv": cv,
        "sigma2": sigma2,
        "coefficients": ing.names.iter().zip(&obs.theta_hat).map(|(k, v)| (k.clone(), *v)).collect::<Vec<_>>(),
        "selected": selected.iter().map(|&j| ing.names[j].clone()).collect::<Vec<_>>(),
        "labels": { "residual_bootstrap": "residual (non-debiased)" },
        "variables": rows,
    });
    Ok(Parts { seed, config: to_value(&s)?, results, coverage: None, qq, trace, extra: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_quad_matches_direct() {
        let x = DesignMatrix::from_col_major(3, 2, vec![1.0, 2.0, 0.0, 0.5, -1.0, 3.0]).unwrap();
        let g = x.gram();
        let c = [0.2, -0.1];
        let b = [1.0, 0.5];
        let d = [b[0] - c[0], b[1] - c[1]];
        let xd = x.mul_vec(&d);
        let direct = xd.iter().map(|v| v * v).sum::<f64>() / 2.0;
        assert!((gram_quad(&g, &c, &b) - direct).abs() < 1e-12);
    }
}
