use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("design matrix is rank deficient at column {column} (relative pivot {pivot:e})")]
    RankDeficient { column: usize, pivot: f64 },

    #[error("coordinate descent did not converge after {sweeps} sweeps (relative change {rel_change:e})")]
    NonConvergence { sweeps: usize, rel_change: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("model `{0}` does not support profile fits")]
    UnsupportedProfile(&'static str),

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}, column `{column}`: {message}")]
    Parse {
        line: usize,
        column: String,
        message: String,
    },

    #[error("missing value at line {line}, column `{column}`")]
    MissingValue { line: usize, column: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    /// Short stable identifier, used in machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Degenerate(_) => "degenerate",
            Error::UnsupportedProfile(_) => "unsupported_profile",
            Error::EmptySample(_) => "empty_sample",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::MissingValue { .. } => "missing_value",
            Error::Io(_) => "io",
            Error::Serialize(_) => "serialize",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
