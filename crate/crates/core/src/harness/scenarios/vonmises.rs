//! Von Mises location on the roulette data: contour values over a uniform
//! grid of angles, DR on that pool, and the CDF of the refined sample.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use super::{positive, Parts};
use crate::calibrate::CandidateDraw;
use crate::contour::{contour_mc, Association, Observed};
use crate::error::{Error, Result};
use crate::harness::config::ScenarioConfig;
use crate::harness::io::{csv_string, qq_rows};
use crate::harness::report::to_value;
use crate::mathkit::rng::RngStream;
use crate::mathkit::special::bessel_i;
use crate::models::{Dataset, Model, VonMises};
use crate::refine::{dr_select, RefinedSample, TieBreak};

/// Roulette wheel stopping angles, in degrees.
pub const ROULETTE_DEGREES: [f64; 9] = [43.0, 45.0, 52.0, 61.0, 75.0, 88.0, 88.0, 279.0, 357.0];

/// Points at which the CDF is tabulated.
pub const CDF_POINTS: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];

const INTEGRATION_STEPS: usize = 4096;

pub fn roulette_radians() -> Vec<f64> {
    ROULETTE_DEGREES.iter().map(|d| d.to_radians()).collect()
}

/// `exp{c cos(g − θ)}` on `[0, 2π)`, normalized by `2π I₀(c)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CircularDensity {
    pub center: f64,
    pub concentration: f64,
}

impl CircularDensity {
    pub fn density(&self, theta: f64) -> f64 {
        (self.concentration * ((self.center - theta).cos() - 1.0)).exp()
            / (TAU * bessel_i(0, self.concentration) * (-self.concentration).exp())
    }

    /// `∫₀^θ` of the density by composite Simpson.
    pub fn cdf(&self, theta: f64) -> f64 {
        let theta = theta.clamp(0.0, TAU);
        let h = theta / INTEGRATION_STEPS as f64;
        let mut acc = self.density(0.0) + self.density(theta);
        for i in 1..INTEGRATION_STEPS {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.density(i as f64 * h);
        }
        (acc * h / 3.0).clamp(0.0, 1.0)
    }

    /// Inverse CDF by bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, TAU);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Mean direction `ḡ` and mean resultant length `R̄`.
pub fn circular_summary(y: &[f64]) -> (f64, f64) {
    let s: f64 = y.iter().map(|v| v.sin()).sum();
    let c: f64 = y.iter().map(|v| v.cos()).sum();
    let g = s.atan2(c).rem_euclid(TAU);
    (g, s.hypot(c) / y.len() as f64)
}

/// Fraction of `thetas` at or below `at`.
pub fn empirical_cdf(thetas: &[f64], at: f64) -> f64 {
    thetas.iter().filter(|t| **t <= at).count() as f64 / thetas.len() as f64
}

pub struct GridDr {
    pub pool: Vec<CandidateDraw>,
    pub refined: RefinedSample,
    /// `(θ, estimated CDF)` at each evaluation point.
    pub cdf: Vec<(f64, f64)>,
}

/// Contour values at every grid angle (angle `k` on `stream.named("grid").child(k)`),
/// then DR with `b_out` selections on `stream.named("dr")`.
pub fn vonmises_grid_dr(
    y: &[f64],
    kappa: f64,
    grid: &[f64],
    n_mc: usize,
    b_out: usize,
    tie: TieBreak,
    eval_at: &[f64],
    stream: &RngStream,
) -> Result<GridDr> {
    if grid.is_empty() {
        return Err(Error::Config("von Mises grid must be nonempty".into()));
    }
    let model = VonMises::new(kappa)?;
    let data = Dataset::scalar(y.to_vec(), "roulette");
    let n = data.n();
    let obs = Observed::fit(&model, data)?;
    let grid_stream = stream.named("grid");
    let pool: Vec<CandidateDraw> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &theta)| {
            let cv = contour_mc(&model, &obs, Association::Joint, &[theta], n_mc, &grid_stream.child(k as u64))?;
            Ok(CandidateDraw {
                theta_star: vec![theta],
                m_used: n,
                t_value: cv.t_value,
                u_value: cv.u_value,
                loss_at_data: model.loss(&obs.data, &[theta]),
            })
        })
        .collect::<Result<_>>()?;
    let refined = dr_select(&pool, b_out, tie, &stream.named("dr"))?;
    let thetas: Vec<f64> = refined.draws.iter().map(|d| d.theta_star[0]).collect();
    let cdf = eval_at.iter().map(|&a| (a, empirical_cdf(&thetas, a))).collect();
    Ok(GridDr { pool, refined, cdf })
}

#[derive(Clone, Debug, Serialize)]
struct Settings {
    concentration: f64,
    grid: usize,
    mc_reps: usize,
    b_out: usize,
    tie_break: TieBreak,
}

#[derive(Clone, Debug, Serialize)]
struct CdfRow {
    theta: f64,
    estimated: f64,
    /// Concentration `κR̄`.
    oracle_displayed: f64,
    /// Concentration `κnR̄`.
    oracle_n_scaled: f64,
}

#[derive(Serialize)]
struct ContourRow {
    theta: f64,
    t_value: f64,
    u_value: f64,
}

pub fn run(cfg: &ScenarioConfig) -> Result<Parts> {
    let seed = cfg.require_seed()?;
    let s = Settings {
        concentration: cfg.concentration.unwrap_or(2.0),
        grid: positive("grid", cfg.grid.unwrap_or(512))?,
        mc_reps: positive("mc_reps", cfg.mc_reps.unwrap_or(100))?,
        b_out: positive("b_out", cfg.b_out.unwrap_or(5000))?,
        tie_break: cfg.tie_break.unwrap_or_default(),
    };
    let y = roulette_radians();
    let grid: Vec<f64> = (0..s.grid).map(|k| TAU * k as f64 / s.grid as f64).collect();
    let out = vonmises_grid_dr(&y, s.concentration, &grid, s.mc_reps, s.b_out, s.tie_break, &CDF_POINTS, &RngStream::new(seed))?;

    let (g, r_bar) = circular_summary(&y);
    let displayed = CircularDensity { center: g, concentration: s.concentration * r_bar };
    let n_scaled = CircularDensity { center: g, concentration: s.concentration * r_bar * y.len() as f64 };
    let table: Vec<CdfRow> = out
        .cdf
        .iter()
        .map(|&(theta, estimated)| CdfRow {
            theta,
            estimated,
            oracle_displayed: displayed.cdf(theta),
            oracle_n_scaled: n_scaled.cdf(theta),
        })
        .collect();

    let thetas: Vec<f64> = out.refined.draws.iter().map(|d| d.theta_star[0]).collect();
    let mut qq = qq_rows("cb_u", &out.refined.u_values(), Ok, 100)?;
    qq.extend(qq_rows("cb_theta_vs_displayed", &thetas, |p| Ok(displayed.quantile(p)), 100)?);
    qq.extend(qq_rows("cb_theta_vs_n_scaled", &thetas, |p| Ok(n_scaled.quantile(p)), 100)?);

    let contour: Vec<ContourRow> = out
        .pool
        .iter()
        .map(|d| ContourRow { theta: d.theta_star[0], t_value: d.t_value, u_value: d.u_value })
        .collect();

    let model = VonMises::new(s.concentration)?;
    let results = serde_json::json!({
        "n": y.len(),
        "theta_hat": model.fit(&Dataset::scalar(y.clone(), "roulette"))?[0],
        "mean_direction": g,
        "mean_resultant_length": r_bar,
        "pool_size": out.pool.len(),
        "refined_size": thetas.len(),
        "refined_ks": out.refined.ks_statistic,
        "oracles": { "displayed": displayed, "n_scaled": n_scaled },
        "cdf": table,
    });
    Ok(Parts {
        seed,
        config: to_value(&s)?,
        results,
        coverage: None,
        qq,
        trace: Vec::new(),
        extra: vec![("contour.csv".to_string(), csv_string(&contour)?)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roulette_summary() {
        let (g, r) = circular_summary(&roulette_radians());
        assert!((g - 0.89099).abs() < 1e-4, "{g}");
        assert!((r - 0.71099).abs() < 1e-4, "{r}");
    }

    #[test]
    fn density_integrates_to_one() {
        for c in [0.5, 1.42, 12.8] {
            let d = CircularDensity { center: 0.9, concentration: c };
            assert!((d.cdf(TAU) - 1.0).abs() < 1e-8, "c = {c}");
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = CircularDensity { center: 0.9, concentration: 1.42 };
        for p in [0.1, 0.5, 0.9] {
            assert!((d.cdf(d.quantile(p)) - p).abs() < 1e-9);
        }
    }

    #[test]
    fn one_point_grid_is_a_step() {
        let out = vonmises_grid_dr(&roulette_radians(), 2.0, &[2.5], 20, 50, TieBreak::Random, &[2.0, 3.0], &RngStream::new(4)).unwrap();
        assert_eq!(out.cdf, vec![(2.0, 0.0), (3.0, 1.0)]);
    }
}
