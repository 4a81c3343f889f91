use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown variant `{0}` (expected ca, eca, eca-hys or eca-hys-fs)")]
    UnknownVariant(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("config file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no node delivered any traffic; fairness is undefined")]
    NoTraffic,
    #[error("empty sample")]
    Empty,
    #[error("need at least 2 samples for a confidence interval, got {0}")]
    TooFewSamples(usize),
    #[error("confidence level must lie in (0, 1), got {0}")]
    BadLevel(f64),
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("output path {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("seed collision between cells {0} and {1}")]
    SeedCollision(String, String),
    #[error("cell {cell} failed: {msg}")]
    Cell { cell: String, msg: String },
}
