//! Soft-thresholded Gaussian mean: RA-DR across a grid of α, against a
//! standard-bootstrap pool whose contour values miss the tails.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{check_alphas, positive, run_label, unit_histogram, Parts, RaSettings};
use crate::calibrate::fixed_m_pool;
use crate::contour::{Association, Observed};
use crate::error::{Error, Result};
use crate::harness::config::{nineteen_level_grid, LambdaSetting, ScenarioConfig};
use crate::harness::io::{csv_string, qq_rows};
use crate::harness::report::{to_value, trace_rows, CoverageTable};
use crate::inference::{marginal_interval, thetas_of};
use crate::mathkit::rng::RngStream;
use crate::models::{Dataset, SoftThreshMean, ThresholdConvention};
use crate::refine::{ks_uniform, ra_dr_pipeline, TieBreak};

const HISTOGRAM_BINS: usize = 20;

#[derive(Clone, Debug, Serialize)]
struct Settings {
    n: usize,
    theta: f64,
    lambda: f64,
    convention: ThresholdConvention,
    alpha_grid: Vec<f64>,
    ra: RaSettings,
    b_out: Option<usize>,
    boot_reps: usize,
    tie_break: TieBreak,
    contour_histogram: bool,
    histogram_draws: usize,
}

#[derive(Clone, Debug, Serialize)]
struct IntervalRow {
    alpha: f64,
    cb: (f64, f64),
    standard_bootstrap: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
struct Results {
    y_bar: f64,
    theta_hat: f64,
    m_alpha: Vec<(f64, usize)>,
    pool_size: usize,
    pool_u_min: f64,
    pool_u_max: f64,
    refined_size: usize,
    refined_ks: f64,
    standard_bootstrap_size: usize,
    standard_bootstrap_ks: f64,
    standard_bootstrap_u_min: f64,
    standard_bootstrap_u_max: f64,
    intervals: Vec<IntervalRow>,
}

#[derive(Serialize)]
struct HistRow {
    source: String,
    alpha: Option<f64>,
    m: usize,
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

pub fn run(cfg: &ScenarioConfig) -> Result<Parts> {
    let seed = cfg.require_seed()?;
    let s = Settings {
        n: positive("n", cfg.n.unwrap_or(100))?,
        theta: cfg.theta.unwrap_or(1.0),
        lambda: match cfg.lambda {
            Some(LambdaSetting::Value(v)) => v,
            Some(LambdaSetting::Cv) => return Err(Error::Config("softthresh-mean takes a numeric lambda".into())),
            None => 0.2,
        },
        convention: cfg.convention.unwrap_or(ThresholdConvention::MeanScale),
        alpha_grid: cfg.alpha_grid.clone().unwrap_or_else(nineteen_level_grid),
        ra: RaSettings::resolve(&cfg.ra, 99, 1.0, 200),
        b_out: cfg.b_out,
        boot_reps: positive("boot_reps", cfg.boot_reps.unwrap_or(1000))?,
        tie_break: cfg.tie_break.unwrap_or_default(),
        contour_histogram: cfg.emit_contour_histogram,
        histogram_draws: positive("draws", cfg.draws.unwrap_or(1000))?,
    };
    check_alphas(&s.alpha_grid)?;
    let root = RngStream::new(seed);
    let model = SoftThreshMean::new(s.lambda, s.convention)?;
    let mut rng = root.named("data").rng();
    let y: Vec<f64> = (0..s.n).map(|_| s.theta + rng.sample::<f64, _>(StandardNormal)).collect();
    let y_bar = y.iter().sum::<f64>() / s.n as f64;
    let obs = Observed::fit(&model, Dataset::scalar(y, "softthresh"))?;

    let base = s.ra.config(s.n, 1, s.alpha_grid[0])?;
    let cb = ra_dr_pipeline(&model, &obs, Association::Joint, &s.alpha_grid, &base, s.b_out, s.tie_break, &root.named("cb"))?;
    let boot = fixed_m_pool(&model, &obs, Association::Joint, s.n, s.boot_reps, s.ra.inner_reps, &root.named("boot"))?;

    let pool_u: Vec<f64> = cb.pool.iter().map(|d| d.u_value).collect();
    let boot_u: Vec<f64> = boot.iter().map(|d| d.u_value).collect();
    let refined_u = cb.refined.u_values();
    let (pool_u_min, pool_u_max) = min_max(&pool_u);
    let (boot_u_min, boot_u_max) = min_max(&boot_u);

    let cb_thetas = cb.refined.thetas();
    let boot_thetas = thetas_of(&boot);
    let mut coverage = CoverageTable::default();
    let mut intervals = Vec::new();
    for &a in &s.alpha_grid {
        let c = marginal_interval(&cb_thetas, &obs.theta_hat, 0, a)?;
        let b = marginal_interval(&boot_thetas, &obs.theta_hat, 0, a)?;
        for (method, (lo, hi)) in [("cb_ra_dr", c), ("standard_bootstrap", b)] {
            coverage.push(&format!("n={},lambda={}", s.n, s.lambda), a, method, &[lo <= s.theta && s.theta <= hi], &[hi - lo])?;
        }
        intervals.push(IntervalRow { alpha: a, cb: c, standard_bootstrap: b });
    }

    let uniform = |p: f64| Ok(p);
    let mut qq = qq_rows("cb_ra_dr_u", &refined_u, uniform, 100)?;
    qq.extend(qq_rows("standard_bootstrap_u", &boot_u, uniform, 100)?);

    let trace = cb.runs.iter().flat_map(|r| trace_rows(&run_label(0, "cb", r.trace.alpha), &r.trace)).collect();

    let mut extra = Vec::new();
    if s.contour_histogram {
        let mut rows = Vec::new();
        for (k, run) in cb.runs.iter().enumerate() {
            let pool = fixed_m_pool(
                &model,
                &obs,
                Association::Joint,
                run.m_alpha,
                s.histogram_draws,
                s.ra.inner_reps,
                &root.named("histogram").child(k as u64),
            )?;
            let u: Vec<f64> = pool.iter().map(|d| d.u_value).collect();
            for (lo, hi, count) in unit_histogram(&u, HISTOGRAM_BINS) {
                rows.push(HistRow { source: "ra_m_alpha".into(), alpha: Some(run.trace.alpha), m: run.m_alpha, bin_lo: lo, bin_hi: hi, count });
            }
        }
        for (lo, hi, count) in unit_histogram(&boot_u, HISTOGRAM_BINS) {
            rows.push(HistRow { source: "standard_bootstrap".into(), alpha: None, m: s.n, bin_lo: lo, bin_hi: hi, count });
        }
        extra.push(("contour_histogram.csv".to_string(), csv_string(&rows)?));
    }

    let results = Results {
        y_bar,
        theta_hat: obs.theta_hat[0],
        m_alpha: cb.runs.iter().map(|r| (r.trace.alpha, r.m_alpha)).collect(),
        pool_size: cb.pool.len(),
        pool_u_min,
        pool_u_max,
        refined_size: refined_u.len(),
        refined_ks: cb.refined.ks_statistic,
        standard_bootstrap_size: boot_u.len(),
        standard_bootstrap_ks: ks_uniform(&boot_u)?,
        standard_bootstrap_u_min: boot_u_min,
        standard_bootstrap_u_max: boot_u_max,
        intervals,
    };
    Ok(Parts {
        seed,
        config: to_value(&s)?,
        results: to_value(&results)?,
        coverage: Some(coverage),
        qq,
        trace,
        extra,
    })
}
