//! Per-scenario drivers. Each returns a [`Parts`] bundle that the harness
//! turns into files.

pub mod lasso;
pub mod linreg;
pub mod mean;
pub mod softthresh;
pub mod vonmises;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::config::{RaOverrides, ScenarioConfig, ScenarioKind};
use super::io::QqRow;
use super::report::{CoverageTable, TraceRow};
use crate::calibrate::RaConfig;
use crate::error::{Error, Result};
use crate::mathkit::linalg::DesignMatrix;
use crate::mathkit::rng::RngStream;

/// Results of a scenario before serialization.
pub struct Parts {
    pub seed: u64,
    pub config: serde_json::Value,
    pub results: serde_json::Value,
    pub coverage: Option<CoverageTable>,
    pub qq: Vec<QqRow>,
    pub trace: Vec<TraceRow>,
    pub extra: Vec<(String, String)>,
}

pub fn run(cfg: &ScenarioConfig) -> Result<Parts> {
    match cfg.scenario {
        ScenarioKind::MeanSimple => mean::run(cfg),
        ScenarioKind::SoftthreshMean => softthresh::run(cfg),
        ScenarioKind::LrJoint | ScenarioKind::LrMarginal => linreg::run(cfg),
        ScenarioKind::LassoSim => lasso::run_sim(cfg),
        ScenarioKind::LassoDiabetes => lasso::run_diabetes(cfg),
        ScenarioKind::VonmisesDr => vonmises::run(cfg),
    }
}

/// RA settings after applying overrides to scenario defaults. Unset clip
/// bounds and start fall back to [`RaConfig::for_data`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RaSettings {
    pub inner_reps: usize,
    pub d: f64,
    pub max_iter: usize,
    pub m_lower: Option<usize>,
    pub m_upper: Option<usize>,
    pub m_init: Option<f64>,
}

impl RaSettings {
    pub fn resolve(o: &RaOverrides, inner_reps: usize, d: f64, max_iter: usize) -> Self {
        Self {
            inner_reps: o.inner_reps.unwrap_or(inner_reps),
            d: o.d.unwrap_or(d),
            max_iter: o.max_iter.unwrap_or(max_iter),
            m_lower: o.m_lower,
            m_upper: o.m_upper,
            m_init: o.m_init,
        }
    }

    pub fn config(&self, n: usize, p: usize, alpha: f64) -> Result<RaConfig> {
        let mut c = RaConfig::for_data(n, p, alpha);
        c.inner_reps = self.inner_reps;
        c.step_constant = self.d * n as f64;
        c.max_iter = self.max_iter;
        if let Some(v) = self.m_lower {
            c.m_lower = v;
        }
        if let Some(v) = self.m_upper {
            c.m_upper = v;
        }
        if c.m_lower > c.m_upper {
            return Err(Error::Config(format!("ra.m_lower {} exceeds ra.m_upper {}", c.m_lower, c.m_upper)));
        }
        c.m_init = self.m_init.unwrap_or_else(|| (n as f64).clamp(c.m_lower as f64, c.m_upper as f64));
        c.validate()?;
        Ok(c)
    }
}

/// `n × p` design with independent standard normal entries.
pub fn gaussian_design(n: usize, p: usize, stream: &RngStream) -> Result<DesignMatrix> {
    let mut rng = stream.rng();
    let v: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    DesignMatrix::from_col_major(n, p, v)
}

/// `(lo, hi, count)` for `bins` equal-width bins over `[0, 1]`.
pub fn unit_histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let mut counts = vec![0; bins];
    for &v in values {
        let k = ((v * bins as f64).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (k as f64 / bins as f64, (k + 1) as f64 / bins as f64, c))
        .collect()
}

pub fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(Error::Config(format!("alpha levels must lie in (0,1), got {alphas:?}")));
    }
    Ok(())
}

pub fn positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        Err(Error::Config(format!("{name} must be >= 1")))
    } else {
        Ok(v)
    }
}

/// Run label used in trace files.
pub fn run_label(rep: usize, part: &str, alpha: f64) -> String {
    format!("rep{rep}/{part}/alpha{alpha}")
}

/// Whether two α lists are the same levels in the same order.
pub fn same_levels(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_edges() {
        let h = unit_histogram(&[0.0, 0.05, 0.5, 1.0, 0.99], 10);
        assert_eq!(h.len(), 10);
        assert_eq!(h[0].2, 2);
        assert_eq!(h[5].2, 1);
        assert_eq!(h[9].2, 2);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 5);
    }

    #[test]
    fn ra_settings_apply_overrides() {
        let o = RaOverrides { inner_reps: Some(7), m_upper: Some(300), ..Default::default() };
        let s = RaSettings::resolve(&o, 99, 1.0, 50);
        let c = s.config(100, 3, 0.1).unwrap();
        assert_eq!((c.inner_reps, c.max_iter, c.m_upper, c.m_lower), (7, 50, 300, 5));
        assert_eq!(c.step_constant, 100.0);
        assert_eq!(c.m_init, 100.0);
        let bad = RaSettings { m_lower: Some(500), ..s };
        assert!(bad.config(100, 3, 0.1).is_err());
    }
}
