//! Experiment harness: configuration, data ingestion, scenario drivers and
//! the files each run writes.

pub mod config;
pub mod cv;
pub mod io;
pub mod report;
pub mod scenarios;

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
pub use config::{ScenarioConfig, ScenarioKind};
pub use report::{Report, ScenarioOutput};

/// Run a scenario. With an explicit thread count the work runs on a private
/// rayon pool of that size; results do not depend on the count.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    let start = Instant::now();
    let (parts, threads) = match cfg.thread_count() {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(format!("cannot build a {t}-thread pool: {e}")))?;
            (pool.install(|| scenarios::run(cfg))?, t)
        }
        None => (scenarios::run(cfg)?, rayon::current_num_threads()),
    };
    let report = Report::new(cfg.scenario.as_str(), parts.seed, &parts.config, &parts.results)?;
    Ok(ScenarioOutput {
        report,
        coverage: parts.coverage,
        qq: parts.qq,
        trace: parts.trace,
        extra: parts.extra,
        wall_seconds: start.elapsed().as_secs_f64(),
        threads,
    })
}

/// Machine-readable form of an error, for stderr.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        Self { error: e.kind(), message: e.to_string() }
    }
}

impl ErrorRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.error))
    }
}
