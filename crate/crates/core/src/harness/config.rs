//! Scenario configuration: a flat `key = value` file, overridden key by key
//! from the command line, then resolved against per-scenario defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ThresholdConvention;
use crate::refine::TieBreak;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    MeanSimple,
    SoftthreshMean,
    LrJoint,
    LrMarginal,
    LassoSim,
    LassoDiabetes,
    VonmisesDr,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::MeanSimple,
        ScenarioKind::SoftthreshMean,
        ScenarioKind::LrJoint,
        ScenarioKind::LrMarginal,
        ScenarioKind::LassoSim,
        ScenarioKind::LassoDiabetes,
        ScenarioKind::VonmisesDr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::MeanSimple => "mean-simple",
            ScenarioKind::SoftthreshMean => "softthresh-mean",
            ScenarioKind::LrJoint => "lr-joint",
            ScenarioKind::LrMarginal => "lr-marginal",
            ScenarioKind::LassoSim => "lasso-sim",
            ScenarioKind::LassoDiabetes => "lasso-diabetes",
            ScenarioKind::VonmisesDr => "vonmises-dr",
        }
    }

    /// Scenarios that generate their own data (and write coverage.csv).
    pub fn is_simulation(self) -> bool {
        !matches!(self, ScenarioKind::LassoDiabetes | ScenarioKind::VonmisesDr)
    }

    pub fn is_regression(self) -> bool {
        matches!(self, ScenarioKind::LrJoint | ScenarioKind::LrMarginal | ScenarioKind::LassoSim)
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSetting {
    Known(f64),
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSetting {
    Value(f64),
    Cv,
}

/// Optional RA overrides; `d` scales the step constant as `c = d·n`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RaOverrides {
    pub inner_reps: Option<usize>,
    pub d: Option<f64>,
    pub max_iter: Option<usize>,
    pub m_lower: Option<usize>,
    pub m_upper: Option<usize>,
    pub m_init: Option<f64>,
}

/// User-facing configuration. Unset fields take the scenario defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    /// Ratio `p/n` for regression scenarios.
    pub kappa: Option<f64>,
    /// Von Mises concentration.
    pub concentration: Option<f64>,
    pub sigma: Option<SigmaSetting>,
    pub lambda: Option<LambdaSetting>,
    pub theta: Option<f64>,
    pub alpha_grid: Option<Vec<f64>>,
    /// α levels whose RA runs feed the DR pool.
    pub pool_alphas: Option<Vec<f64>>,
    pub reps: Option<usize>,
    pub ra: RaOverrides,
    pub b_out: Option<usize>,
    pub boot_reps: Option<usize>,
    /// Size of the fresh bootstrap sample drawn at each calibrated `m`.
    pub draws: Option<usize>,
    /// Monte-Carlo replicates per grid point (von Mises).
    pub mc_reps: Option<usize>,
    pub grid: Option<usize>,
    pub coordinate: Option<usize>,
    pub data: Option<PathBuf>,
    pub convention: Option<ThresholdConvention>,
    pub tie_break: Option<TieBreak>,
    pub emit_contour_histogram: bool,
    pub full_scale: bool,
    pub output_dir: PathBuf,
    /// Worker threads; never affects results.
    pub threads: Option<usize>,
}

impl ScenarioConfig {
    pub fn new(scenario: ScenarioKind) -> Self {
        Self {
            scenario,
            seed: None,
            n: None,
            p: None,
            kappa: None,
            concentration: None,
            sigma: None,
            lambda: None,
            theta: None,
            alpha_grid: None,
            pool_alphas: None,
            reps: None,
            ra: RaOverrides::default(),
            b_out: None,
            boot_reps: None,
            draws: None,
            mc_reps: None,
            grid: None,
            coordinate: None,
            data: None,
            convention: None,
            tie_break: None,
            emit_contour_histogram: false,
            full_scale: false,
            output_dir: PathBuf::from("out"),
            threads: None,
        }
    }

    /// Parse a config file body. `scenario` must be among the keys.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let pairs = parse_kv(text)?;
        let scenario = pairs
            .iter()
            .find(|(k, _)| k == "scenario")
            .ok_or_else(|| Error::Config("config file has no `scenario` key".into()))?
            .1
            .parse()?;
        let mut cfg = Self::new(scenario);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "scenario") {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    /// Apply pairs from a config file on top of `self`; later keys win.
    pub fn merge_kv_str(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_kv(text)? {
            if k == "scenario" {
                let s: ScenarioKind = v.parse()?;
                if s != self.scenario {
                    return Err(Error::Config(format!(
                        "config file is for `{s}` but `{}` was requested",
                        self.scenario
                    )));
                }
            } else {
                self.set(&k, &v)?;
            }
        }
        Ok(())
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = Some(num(key, v)?),
            "n" => self.n = Some(num(key, v)?),
            "p" => self.p = Some(num(key, v)?),
            "kappa" => self.kappa = Some(num(key, v)?),
            "concentration" => self.concentration = Some(num(key, v)?),
            "sigma" => {
                self.sigma = Some(if v.eq_ignore_ascii_case("unknown") {
                    SigmaSetting::Unknown
                } else {
                    SigmaSetting::Known(num(key, v)?)
                })
            }
            "lambda" => {
                self.lambda = Some(if v.eq_ignore_ascii_case("cv") {
                    LambdaSetting::Cv
                } else {
                    LambdaSetting::Value(num(key, v)?)
                })
            }
            "theta" => self.theta = Some(num(key, v)?),
            "alpha" | "alpha_grid" => self.alpha_grid = Some(num_list(key, v)?),
            "pool_alphas" => self.pool_alphas = Some(num_list(key, v)?),
            "reps" => self.reps = Some(num(key, v)?),
            "ra.b" => self.ra.inner_reps = Some(num(key, v)?),
            "ra.d" => self.ra.d = Some(num(key, v)?),
            "ra.t" => self.ra.max_iter = Some(num(key, v)?),
            "ra.m_lower" => self.ra.m_lower = Some(num(key, v)?),
            "ra.m_upper" => self.ra.m_upper = Some(num(key, v)?),
            "ra.m0" => self.ra.m_init = Some(num(key, v)?),
            "b_out" => self.b_out = Some(num(key, v)?),
            "boot_reps" => self.boot_reps = Some(num(key, v)?),
            "draws" => self.draws = Some(num(key, v)?),
            "mc_reps" => self.mc_reps = Some(num(key, v)?),
            "grid" => self.grid = Some(num(key, v)?),
            "coordinate" => self.coordinate = Some(num(key, v)?),
            "data" => self.data = Some(PathBuf::from(v)),
            "convention" => {
                self.convention = Some(match v {
                    "displayed" => ThresholdConvention::Displayed,
                    "mean-scale" | "mean_scale" => ThresholdConvention::MeanScale,
                    _ => return Err(bad(key, v, "expected `displayed` or `mean-scale`")),
                })
            }
            "tie_break" => {
                self.tie_break = Some(match v {
                    "random" => TieBreak::Random,
                    "lowest-index" | "lowest_index" => TieBreak::LowestIndex,
                    _ => return Err(bad(key, v, "expected `random` or `lowest-index`")),
                })
            }
            "emit_contour_histogram" => self.emit_contour_histogram = flag(key, v)?,
            "full_scale" => self.full_scale = flag(key, v)?,
            "out" | "output_dir" => self.output_dir = PathBuf::from(v),
            "threads" => self.threads = Some(num(key, v)?),
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config(format!("scenario `{}` needs an explicit seed", self.scenario)))
    }

    /// `p` directly, or `round(κ·n)`. Giving both is an error.
    pub fn resolve_p(&self, n: usize, default_p: usize) -> Result<usize> {
        match (self.p, self.kappa) {
            (Some(_), Some(_)) => Err(Error::Config("give either p or kappa, not both".into())),
            (Some(p), None) => Ok(p),
            (None, Some(k)) if k > 0.0 && k < 1.0 => Ok(((k * n as f64).round() as usize).max(1)),
            (None, Some(k)) => Err(Error::Config(format!("kappa must lie in (0,1), got {k}"))),
            (None, None) => Ok(default_p),
        }
    }

    pub fn resolve_reps(&self, default: usize) -> Result<usize> {
        match self.reps.unwrap_or(default) {
            0 => Err(Error::Config("reps must be >= 1".into())),
            r => Ok(r),
        }
    }

    /// Thread count from the config, else `CB_THREADS`, else rayon's default.
    pub fn thread_count(&self) -> Option<usize> {
        self.threads
            .or_else(|| std::env::var("CB_THREADS").ok().and_then(|s| s.trim().parse().ok()))
            .filter(|&t| t > 0)
    }
}

fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            column: String::new(),
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn bad(key: &str, value: &str, why: &str) -> Error {
    Error::Config(format!("bad value `{value}` for `{key}`: {why}"))
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(key, v, &e.to_string()))
}

fn num_list(key: &str, v: &str) -> Result<Vec<f64>> {
    let list: Vec<f64> = v
        .split(',')
        .map(|s| num::<f64>(key, s.trim()))
        .collect::<Result<_>>()?;
    if list.is_empty() || list.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(bad(key, v, "expected probabilities in (0,1)"));
    }
    Ok(list)
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(key, v, "expected a boolean")),
    }
}

/// `0.05, 0.15, …, 0.95`.
pub fn ten_level_grid() -> Vec<f64> {
    (0..10).map(|k| (5 + 10 * k) as f64 / 100.0).collect()
}

/// `0.05, 0.10, …, 0.95`.
pub fn nineteen_level_grid() -> Vec<f64> {
    (1..20).map(|k| (5 * k) as f64 / 100.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let text = "# lr run\nscenario = lr-joint\nn = 120\nkappa = 0.25\nsigma = unknown\nalpha = 0.05, 0.5\nra.b = 49\n";
        let mut cfg = ScenarioConfig::from_kv_str(text).unwrap();
        assert_eq!(cfg.scenario, ScenarioKind::LrJoint);
        assert_eq!(cfg.n, Some(120));
        assert_eq!(cfg.sigma, Some(SigmaSetting::Unknown));
        assert_eq!(cfg.alpha_grid, Some(vec![0.05, 0.5]));
        assert_eq!(cfg.ra.inner_reps, Some(49));
        assert_eq!(cfg.resolve_p(120, 60).unwrap(), 30);
        cfg.set("n", "80").unwrap();
        assert_eq!(cfg.n, Some(80));
        cfg.set("p", "10").unwrap();
        assert!(cfg.resolve_p(80, 60).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = ScenarioConfig::new(ScenarioKind::MeanSimple);
        assert!(matches!(cfg.set("n", "many"), Err(Error::Config(_))));
        assert!(matches!(cfg.set("alpha", "0.05, 1.5"), Err(Error::Config(_))));
        assert!(matches!(cfg.set("colour", "red"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_kv_str("n = 3"), Err(Error::Config(_))));
        assert!(matches!(ScenarioConfig::from_kv_str("scenario lr-joint"), Err(Error::Parse { line: 1, .. })));
        assert!(cfg.require_seed().is_err());
        cfg.reps = Some(0);
        assert!(cfg.resolve_reps(5).is_err());
        let mut other = ScenarioConfig::new(ScenarioKind::LassoSim);
        assert!(other.merge_kv_str("scenario = lr-joint").is_err());
        other.merge_kv_str("lambda = cv\nfull_scale = true").unwrap();
        assert_eq!(other.lambda, Some(LambdaSetting::Cv));
        assert!(other.full_scale);
    }

    #[test]
    fn scenario_names_round_trip() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.as_str().parse::<ScenarioKind>().unwrap(), k);
        }
        assert_eq!(ten_level_grid().len(), 10);
        assert_eq!(nineteen_level_grid()[18], 0.95);
    }
}
