//! Report, coverage table and the files a scenario run writes.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::io::{csv_string, QqRow};
use crate::calibrate::CalibrationTrace;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Everything in `report.json`. Contains no timing, so identical configs
/// give identical bytes.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub config_digest: String,
    pub results: serde_json::Value,
}

impl Report {
    pub fn new<C: Serialize, R: Serialize>(scenario: &str, seed: u64, config: &C, results: &R) -> Result<Self> {
        let config = to_value(config)?;
        let config_digest = digest(&config)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            scenario: scenario.to_string(),
            seed,
            config,
            config_digest,
            results: to_value(results)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map(|s| s + "\n").map_err(|e| Error::Serialize(e.to_string()))
    }
}

pub(crate) fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::Serialize(e.to_string()))
}

/// Hex SHA-256 of the compact JSON form (object keys sorted).
pub fn digest(config: &serde_json::Value) -> Result<String> {
    let bytes = serde_json::to_vec(config).map_err(|e| Error::Serialize(e.to_string()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageRow {
    pub setting: String,
    pub alpha: f64,
    pub method: String,
    pub coverage: f64,
    pub coverage_se: f64,
    /// Mean interval length or region threshold.
    pub size_mean: f64,
    pub size_se: f64,
    pub reps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CoverageTable {
    pub rows: Vec<CoverageRow>,
}

impl CoverageTable {
    /// Add a row from per-replication hit indicators and region sizes. The
    /// coverage SE is binomial, the size SE is `sd/√R`.
    pub fn push(&mut self, setting: &str, alpha: f64, method: &str, hits: &[bool], sizes: &[f64]) -> Result<()> {
        if hits.is_empty() || hits.len() != sizes.len() {
            return Err(Error::EmptySample(format!("coverage row `{method}` needs matching nonempty inputs")));
        }
        let r = hits.len() as f64;
        let coverage = hits.iter().filter(|h| **h).count() as f64 / r;
        let size_mean = sizes.iter().sum::<f64>() / r;
        let size_se = crate::mathkit::stats::sample_sd(sizes) / r.sqrt();
        self.rows.push(CoverageRow {
            setting: setting.to_string(),
            alpha,
            method: method.to_string(),
            coverage,
            coverage_se: (coverage * (1.0 - coverage) / r).sqrt(),
            size_mean,
            size_se: if size_se.is_finite() { size_se } else { 0.0 },
            reps: hits.len(),
        });
        Ok(())
    }

    pub fn find(&self, setting: &str, alpha: f64, method: &str) -> Option<&CoverageRow> {
        self.rows
            .iter()
            .find(|r| r.setting == setting && r.method == method && (r.alpha - alpha).abs() < 1e-12)
    }

    pub fn to_csv(&self) -> Result<String> {
        csv_string(&self.rows)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub run: String,
    pub alpha: f64,
    pub t: usize,
    pub m_real: f64,
    pub m_int: usize,
    pub u_value: f64,
    pub z: f64,
}

/// Flatten an RA trace under the label `run`.
pub fn trace_rows(run: &str, trace: &CalibrationTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            run: run.to_string(),
            alpha: trace.alpha,
            t: r.t,
            m_real: r.m_real,
            m_int: r.m_int,
            u_value: r.u_value,
            z: r.z,
        })
        .collect()
}

/// A finished run held in memory.
#[derive(Clone, Debug)]
pub struct ScenarioOutput {
    pub report: Report,
    pub coverage: Option<CoverageTable>,
    pub qq: Vec<QqRow>,
    pub trace: Vec<TraceRow>,
    /// Additional plot-data files: (file name, CSV text).
    pub extra: Vec<(String, String)>,
    pub wall_seconds: f64,
    pub threads: usize,
}

impl ScenarioOutput {
    pub fn results(&self) -> &serde_json::Value {
        &self.report.results
    }

    /// Write every file under `dir` and return the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, text: &str| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            written.push(path);
            Ok(())
        };
        put("report.json", &self.report.to_json()?)?;
        if let Some(cov) = &self.coverage {
            put("coverage.csv", &cov.to_csv()?)?;
        }
        if !self.qq.is_empty() {
            put("qq.csv", &csv_string(&self.qq)?)?;
        }
        if !self.trace.is_empty() {
            put("trace.csv", &csv_string(&self.trace)?)?;
        }
        for (name, text) in &self.extra {
            put(name, text)?;
        }
        let timing = serde_json::json!({ "wall_seconds": self.wall_seconds, "threads": self.threads });
        put("timing.json", &(timing.to_string() + "\n"))?;
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_rows_and_errors() {
        let mut t = CoverageTable::default();
        t.push("s", 0.05, "cb", &[true, true, false, true], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = t.find("s", 0.05, "cb").unwrap();
        assert_eq!(r.coverage, 0.75);
        assert!((r.coverage_se - (0.75_f64 * 0.25 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(r.size_mean, 2.5);
        assert!(t.push("s", 0.05, "x", &[], &[]).is_err());
        assert!(t.find("s", 0.1, "cb").is_none());
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("setting,alpha,method,coverage,coverage_se,size_mean,size_se,reps\n"));
    }

    #[test]
    fn digest_tracks_content() {
        let a = serde_json::json!({"n": 50, "seed": 1});
        let b = serde_json::json!({"seed": 1, "n": 50});
        let c = serde_json::json!({"n": 51, "seed": 1});
        assert_eq!(digest(&a).unwrap(), digest(&b).unwrap());
        assert_ne!(digest(&a).unwrap(), digest(&c).unwrap());
        assert_eq!(digest(&a).unwrap().len(), 64);
    }
}
