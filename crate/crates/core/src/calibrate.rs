//! Resampling approximation (RA): a Robbins–Monro search for the resample
//! size `m` at which the bootstrapped contour values undershoot `α` with
//! probability `α`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{association, count_at_or_below, Association, Observed};
use crate::error::{Error, Result};
use crate::mathkit::rng::RngStream;
use crate::mathkit::special::{chisq_density, chisq_quantile};
use crate::mathkit::stats::sample_sd;
use crate::models::{Dataset, Model};

// Child indices of an iteration's stream.
const ROUND: u64 = 0;
const RESAMPLE: u64 = 1;
const INNER: u64 = 2;
const RETRY_RESAMPLE: u64 = 3;
const RETRY_INNER: u64 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaConfig {
    pub alpha: f64,
    /// Inner Monte-Carlo replicates `B` per iteration.
    pub inner_reps: usize,
    /// Step constant `c` in `c/(t+1)`.
    pub step_constant: f64,
    /// Iteration budget `T`.
    pub max_iter: usize,
    pub m_lower: usize,
    pub m_upper: usize,
    pub m_init: f64,
}

impl RaConfig {
    /// Defaults for a dataset with `n` rows and `p` parameters: `B = 10`,
    /// `c = 10n`, `T = 100`, `M_l = max(p + 2, 5)`, `M_u = 10n`, `m0 = n`.
    pub fn for_data(n: usize, p: usize, alpha: f64) -> Self {
        let m_lower = (p + 2).max(5);
        Self {
            alpha,
            inner_reps: 10,
            step_constant: 10.0 * n as f64,
            max_iter: 100,
            m_lower,
            m_upper: (10 * n).max(m_lower),
            m_init: (n as f64).max(m_lower as f64),
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must be in (0,1), got {}", self.alpha));
        }
        if self.inner_reps == 0 {
            return fail("inner replicate count B must be >= 1".into());
        }
        if !(self.step_constant >= 0.0 && self.step_constant.is_finite()) {
            return fail(format!("step constant must be finite and >= 0, got {}", self.step_constant));
        }
        if self.m_lower == 0 || self.m_lower > self.m_upper {
            return fail(format!("need 1 <= M_l <= M_u, got M_l = {}, M_u = {}", self.m_lower, self.m_upper));
        }
        if !(self.m_init >= self.m_lower as f64 && self.m_init <= self.m_upper as f64) {
            return fail(format!("m0 = {} outside [{}, {}]", self.m_init, self.m_lower, self.m_upper));
        }
        Ok(())
    }

    fn z_scale(&self) -> f64 {
        (self.inner_reps as f64 * self.alpha * (1.0 - self.alpha)).sqrt()
    }
}

/// One bootstrapped estimate with its association and contour values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateDraw {
    pub theta_star: Vec<f64>,
    pub m_used: usize,
    /// `T_{y,θ*}` against the observed data.
    pub t_value: f64,
    /// `P/B`, the inner-replicate contour estimate.
    pub u_value: f64,
    /// `ℓ(y, θ*)`.
    pub loss_at_data: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub m_real: f64,
    pub m_int: usize,
    pub u_value: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTrace {
    pub alpha: f64,
    pub records: Vec<TraceRecord>,
    pub m_final_real: f64,
    pub m_alpha: usize,
    /// Standard deviation of `m_real` over the last fifth of the run.
    pub tail_sd: f64,
    /// `tail_sd` is within 5% of the tail mean.
    pub converged: bool,
    /// Iterations whose first resample failed to fit and was redrawn.
    pub retries: usize,
}

#[derive(Clone, Debug)]
pub struct RaOutcome {
    pub m_alpha: usize,
    pub trace: CalibrationTrace,
    pub pool: Vec<CandidateDraw>,
}

/// `m` rows drawn uniformly with replacement.
pub fn resample_m_of_n<R: Rng + ?Sized>(data: &Dataset, m: usize, rng: &mut R) -> Result<Dataset> {
    let n = data.n();
    if n == 0 {
        return Err(Error::EmptySample("cannot resample an empty dataset".into()));
    }
    if m == 0 {
        return Err(Error::Domain("resample size must be >= 1".into()));
    }
    let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..n)).collect();
    Ok(data.select_rows(&idx))
}

/// `⌊m⌋ + Bernoulli(m − ⌊m⌋)`.
pub fn randomized_round<R: Rng + ?Sized>(m_real: f64, rng: &mut R) -> Result<usize> {
    if !(m_real >= 0.0 && m_real.is_finite()) {
        return Err(Error::Domain(format!("cannot round {m_real}")));
    }
    let floor = m_real.floor();
    let frac = m_real - floor;
    let up = frac > 0.0 && rng.random::<f64>() < frac;
    Ok(floor as usize + usize::from(up))
}

/// Integer resample size for iteration state `m_real`: the clip bound when
/// outside `[M_l, M_u]`, a randomized rounding otherwise.
pub fn clip_or_round<R: Rng + ?Sized>(m_real: f64, config: &RaConfig, rng: &mut R) -> Result<usize> {
    if m_real >= config.m_upper as f64 {
        Ok(config.m_upper)
    } else if m_real < config.m_lower as f64 {
        Ok(config.m_lower)
    } else {
        Ok(randomized_round(m_real, rng)?.clamp(config.m_lower, config.m_upper))
    }
}

fn draw_once(
    model: &dyn Model,
    obs: &Observed,
    assoc: Association,
    m: usize,
    config: &RaConfig,
    resample_stream: &RngStream,
    inner_stream: &RngStream,
) -> Result<CandidateDraw> {
    let boot = resample_m_of_n(&obs.data, m, &mut resample_stream.rng())?;
    let theta_star = model.fit_near(&boot, &obs.theta_hat)?;
    let t_value = association(model, obs, assoc, &theta_star)?;
    let hits = count_at_or_below(model, &obs.data, assoc, &theta_star, t_value, config.inner_reps, inner_stream)?;
    Ok(CandidateDraw {
        loss_at_data: model.loss(&obs.data, &theta_star),
        theta_star,
        m_used: m,
        t_value,
        u_value: hits as f64 / config.inner_reps as f64,
    })
}

/// One RA iteration at integer size `m`: returns the draw, `Z_t`, and
/// whether the first resample had to be replaced.
pub fn ra_step(
    model: &dyn Model,
    obs: &Observed,
    assoc: Association,
    m: usize,
    config: &RaConfig,
    stream: &RngStream,
) -> Result<(CandidateDraw, f64, bool)> {
    let (draw, retried) = match draw_once(model, obs, assoc, m, config, &stream.child(RESAMPLE), &stream.child(INNER)) {
        Ok(d) => (d, false),
        Err(_) => (
            draw_once(model, obs, assoc, m, config, &stream.child(RETRY_RESAMPLE), &stream.child(RETRY_INNER))?,
            true,
        ),
    };
    let hit = if draw.u_value <= config.alpha { 1.0 } else { 0.0 };
    let z = (hit - config.alpha) / config.z_scale();
    Ok((draw, z, retried))
}

/// Full RA run: `max_iter` iterations of clip/round, step and update
/// `m ← clamp(m, M_l, M_u) + c/(t+1)·Z_t`. Returns `⌊m⁽ᵀ⁾⌋ − 1` (at least
/// `M_l`), the trace and every draw made on the way.
pub fn ra_run(
    model: &dyn Model,
    obs: &Observed,
    assoc: Association,
    config: &RaConfig,
    stream: &RngStream,
) -> Result<RaOutcome> {
    config.validate()?;
    let (lo, hi) = (config.m_lower as f64, config.m_upper as f64);
    let mut m_real = config.m_init;
    let mut records = Vec::with_capacity(config.max_iter);
    let mut pool = Vec::with_capacity(config.max_iter);
    let mut retries = 0;
    for t in 0..config.max_iter {
        let st = stream.child(t as u64);
        let m_int = clip_or_round(m_real, config, &mut st.child(ROUND).rng())?;
        let (draw, z, retried) = ra_step(model, obs, assoc, m_int, config, &st)?;
        retries += usize::from(retried);
        records.push(TraceRecord { t, m_real, m_int, u_value: draw.u_value, z });
        pool.push(draw);
        m_real = m_real.clamp(lo, hi) + config.step_constant / (t as f64 + 1.0) * z;
    }
    let m_final = m_real.clamp(lo, hi);
    let m_alpha = ((m_final.floor() as usize).saturating_sub(1)).max(config.m_lower);
    let tail: Vec<f64> = records
        .iter()
        .skip(records.len() - records.len() / 5)
        .map(|r| r.m_real)
        .collect();
    let tail_sd = sample_sd(&tail);
    let tail_mean = if tail.is_empty() { m_final } else { tail.iter().sum::<f64>() / tail.len() as f64 };
    let trace = CalibrationTrace {
        alpha: config.alpha,
        records,
        m_final_real: m_final,
        m_alpha,
        tail_sd,
        converged: tail_sd <= 0.05 * tail_mean,
        retries,
    };
    Ok(RaOutcome { m_alpha, trace, pool })
}

/// `m`-out-of-`n` bootstrap draws at a fixed `m`, each with its `B`-replicate
/// contour value. Draw `i` uses stream `stream.child(i)`.
pub fn fixed_m_pool(
    model: &dyn Model,
    obs: &Observed,
    assoc: Association,
    m: usize,
    count: usize,
    inner_reps: usize,
    stream: &RngStream,
) -> Result<Vec<CandidateDraw>> {
    let config = RaConfig { inner_reps: inner_reps.max(1), ..RaConfig::for_data(obs.n(), 1, 0.5) };
    (0..count)
        .into_par_iter()
        .map(|i| {
            let st = stream.child(i as u64);
            ra_step(model, obs, assoc, m, &config, &st).map(|(d, _, _)| d)
        })
        .collect()
}

/// Monte-Carlo estimate of `f^α(m) = P(u ≤ α)` at a fixed `m`.
pub fn undershoot_rate(
    model: &dyn Model,
    obs: &Observed,
    assoc: Association,
    m: usize,
    alpha: f64,
    draws: usize,
    inner_reps: usize,
    stream: &RngStream,
) -> Result<f64> {
    let pool = fixed_m_pool(model, obs, assoc, m, draws, inner_reps, stream)?;
    Ok(pool.iter().filter(|d| d.u_value <= alpha).count() as f64 / draws as f64)
}

/// `χ²_p(q)·q/m*` with `q = χ²_{1−α,p}`: the Gaussian-approximation bound on
/// the jump of `f^α` between neighbouring integers near `m*`.
pub fn calibration_error_bound(_n: usize, p: usize, alpha: f64, m_star: usize) -> Result<f64> {
    if m_star == 0 {
        return Err(Error::Domain("m* must be >= 1".into()));
    }
    let q = chisq_quantile(1.0 - alpha, p as f64)?;
    Ok(chisq_density(q, p as f64)? * q / m_star as f64)
}

/// Root `⌊n/c⌋` of the Gaussian approximation in which the contour set is a
/// `N(θ̂, Σ/c)` probability contour and `θ*(m) ~ N(θ̂, (n/m)Σ)`.
pub fn gaussian_approx_m_star(n: usize, c: f64) -> Result<usize> {
    if !(c > 0.0) {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    Ok(((n as f64 / c).floor() as usize).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::linalg::{DesignMatrix, Standardization};
    use crate::mathkit::stats::spearman;
    use crate::models::{GaussianMean, LinReg};
    use rand_distr::StandardNormal;
    use std::collections::HashSet;

    fn mean_obs(n: usize, seed: u64) -> Observed {
        let mut rng = RngStream::new(seed).rng();
        let y = (0..n).map(|_| 1.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        Observed::fit(&GaussianMean::new(1.0).unwrap(), Dataset::scalar(y, "mean")).unwrap()
    }

    fn linreg_obs(n: usize, p: usize, seed: u64) -> Observed {
        let mut rng = RngStream::new(seed).rng();
        let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = DesignMatrix::from_col_major(n, p, data).unwrap();
        x.standardize(Standardization::Sample).unwrap();
        let y: Vec<f64> = (0..n).map(|i| x.get(i, 0) + rng.sample::<f64, _>(StandardNormal)).collect();
        Observed::fit(&LinReg::known(1.0).unwrap(), Dataset::regression(x, y, "lr").unwrap()).unwrap()
    }

    #[test]
    fn resample_examples() {
        let d = Dataset::scalar(vec![4.5], "one");
        let r = resample_m_of_n(&d, 3, &mut RngStream::new(1).rng()).unwrap();
        assert_eq!(r.y, vec![4.5; 3]);
        let big = Dataset::scalar((0..100_000).map(f64::from).collect(), "big");
        let r = resample_m_of_n(&big, 100_000, &mut RngStream::new(2).rng()).unwrap();
        let distinct: HashSet<u64> = r.y.iter().map(|v| *v as u64).collect();
        let frac = distinct.len() as f64 / 100_000.0;
        assert!((frac - (1.0 - (-1.0f64).exp())).abs() < 0.005, "{frac}");
        let a = resample_m_of_n(&big, 50, &mut RngStream::new(3).rng()).unwrap();
        let b = resample_m_of_n(&big, 50, &mut RngStream::new(3).rng()).unwrap();
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn randomized_round_expectation() {
        let mut rng = RngStream::new(4).rng();
        assert!((0..100).all(|_| randomized_round(7.0, &mut rng).unwrap() == 7));
        for (m, lo) in [(7.25, 7usize), (0.999, 0)] {
            let draws: Vec<usize> = (0..100_000).map(|_| randomized_round(m, &mut rng).unwrap()).collect();
            assert!(draws.iter().all(|&d| d == lo || d == lo + 1));
            let mean = draws.iter().sum::<usize>() as f64 / 1e5;
            assert!((mean - m).abs() < 0.01, "{mean}");
        }
        assert!(randomized_round(-1.0, &mut rng).is_err());
    }

    #[test]
    fn step_with_one_inner_replicate() {
        let m = GaussianMean::new(1.0).unwrap();
        let obs = mean_obs(30, 5);
        let cfg = RaConfig { inner_reps: 1, ..RaConfig::for_data(30, 1, 0.05) };
        let lo = -0.05 / (0.05f64 * 0.95).sqrt();
        let hi = 0.95 / (0.05f64 * 0.95).sqrt();
        for s in 0..30 {
            let (_, z, _) = ra_step(&m, &obs, Association::Joint, 30, &cfg, &RngStream::new(s)).unwrap();
            assert!((z - lo).abs() < 1e-12 || (z - hi).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_m_rarely_undershoots() {
        let m = GaussianMean::new(1.0).unwrap();
        let obs = mean_obs(50, 6);
        let cfg = RaConfig::for_data(50, 1, 0.05);
        let under = (0..100)
            .filter(|&s| {
                let (d, _, _) = ra_step(&m, &obs, Association::Joint, 5000, &cfg, &RngStream::new(s)).unwrap();
                d.u_value <= 0.05
            })
            .count();
        assert!(under <= 5, "{under}");
    }

    #[test]
    fn zero_step_never_moves() {
        let m = GaussianMean::new(1.0).unwrap();
        let obs = mean_obs(40, 7);
        let cfg = RaConfig { step_constant: 0.0, max_iter: 20, ..RaConfig::for_data(40, 1, 0.1) };
        let out = ra_run(&m, &obs, Association::Joint, &cfg, &RngStream::new(8)).unwrap();
        assert_eq!(out.m_alpha, 39);
        assert!(out.trace.records.iter().all(|r| r.m_int == 40 && r.m_real == 40.0));
    }

    #[test]
    fn trace_invariants() {
        let m = LinReg::known(1.0).unwrap();
        let obs = linreg_obs(40, 4, 9);
        let cfg = RaConfig { max_iter: 60, ..RaConfig::for_data(40, 4, 0.2) };
        let out = ra_run(&m, &obs, Association::Joint, &cfg, &RngStream::new(10)).unwrap();
        let scale = (10.0f64 * 0.2 * 0.8).sqrt();
        let zs = [-0.2 / scale, 0.8 / scale];
        for (r, d) in out.trace.records.iter().zip(&out.pool) {
            assert!((cfg.m_lower..=cfg.m_upper).contains(&r.m_int));
            assert!(zs.iter().any(|z| (z - r.z).abs() < 1e-12));
            assert_eq!(r.m_int, d.m_used);
            assert_eq!(r.u_value, d.u_value);
            assert!(d.t_value <= 1e-12 && (0.0..=1.0).contains(&d.u_value));
        }
        assert_eq!(out.pool.len(), 60);
        assert!(out.m_alpha >= cfg.m_lower);
    }

    #[test]
    fn ra_run_is_deterministic() {
        let m = GaussianMean::new(1.0).unwrap();
        let obs = mean_obs(30, 11);
        let cfg = RaConfig { max_iter: 30, ..RaConfig::for_data(30, 1, 0.1) };
        let a = ra_run(&m, &obs, Association::Joint, &cfg, &RngStream::new(12)).unwrap();
        let b = ra_run(&m, &obs, Association::Joint, &cfg, &RngStream::new(12)).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.pool, b.pool);
    }

    #[test]
    fn config_validation() {
        let ok = RaConfig::for_data(50, 3, 0.05);
        assert!(ok.validate().is_ok());
        assert!(ok.with_alpha(1.0).validate().is_err());
        assert!(RaConfig { inner_reps: 0, ..ok.clone() }.validate().is_err());
        assert!(RaConfig { m_lower: 600, ..ok.clone() }.validate().is_err());
        assert!(RaConfig { m_init: 2.0, ..ok }.validate().is_err());
    }

    #[test]
    fn step_sizes_satisfy_robbins_monro() {
        let c = 3.0;
        let terms = 1_000_000usize;
        let (mut s1, mut s2) = (0.0, 0.0);
        for t in 0..terms {
            let g = c / (t as f64 + 1.0);
            s1 += g;
            s2 += g * g;
        }
        let h = (terms as f64).ln();
        assert!(s1 >= c * h && s1 <= c * (h + 1.0));
        assert!(s2 <= c * c * std::f64::consts::PI.powi(2) / 6.0);
    }

    #[test]
    fn error_bound_examples() {
        let m_star = gaussian_approx_m_star(20, 1.0).unwrap();
        let b = calibration_error_bound(20, 10, 0.05, m_star).unwrap();
        assert!((0.005..=0.02).contains(&b), "{b}");
        let b2 = calibration_error_bound(20, 10, 0.05, 2 * m_star).unwrap();
        assert!((b / b2 - 2.0).abs() < 1e-12);
        assert!(calibration_error_bound(20, 10, 0.05, 1_000_000_000).unwrap() < 1e-9);
        assert!(calibration_error_bound(20, 10, 0.05, 0).is_err());
    }

    #[test]
    fn undershoot_decreases_in_m_for_gaussian_mean() {
        let m = GaussianMean::new(1.0).unwrap();
        let obs = mean_obs(50, 13);
        let grid = [10usize, 20, 35, 50, 75, 110, 160, 250];
        let rates: Vec<f64> = grid
            .iter()
            .enumerate()
            .map(|(k, &mm)| undershoot_rate(&m, &obs, Association::Joint, mm, 0.2, 300, 19, &RngStream::new(14).child(k as u64)).unwrap())
            .collect();
        let ms: Vec<f64> = grid.iter().map(|&v| v as f64).collect();
        assert!(spearman(&ms, &rates).unwrap() <= -0.9, "{rates:?}");
    }

    #[test]
    fn loss_cdfs_ordered_in_m() {
        // Larger m puts the bootstrap estimate closer to θ̂, so its loss gap
        // is stochastically smaller.
        let model = LinReg::known(1.0).unwrap();
        let obs = linreg_obs(100, 30, 15);
        let gaps = |m: usize, s: u64| -> Vec<f64> {
            let mut g: Vec<f64> = (0..1000u64)
                .map(|i| {
                    let b = resample_m_of_n(&obs.data, m, &mut RngStream::new(s).child(i).rng()).unwrap();
                    model.loss(&obs.data, &model.fit(&b).unwrap()) - obs.min_loss
                })
                .collect();
            g.sort_by(f64::total_cmp);
            g
        };
        let (small, large) = (gaps(100, 16), gaps(200, 17));
        for d in 1..10 {
            let x = small[d * 100];
            let cdf_large = large.partition_point(|v| *v <= x) as f64 / 1000.0;
            let cdf_small = (d * 100 + 1) as f64 / 1000.0;
            assert!(cdf_large >= cdf_small - 0.05, "decile {d}");
        }
    }
}
