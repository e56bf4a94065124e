//! Error types shared across the harness.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed csv {path}: {reason}")]
    MalformedCsv { path: PathBuf, reason: String },

    #[error("duplicate timestamp {timestamp} in {path}")]
    DuplicateTimestamp { path: PathBuf, timestamp: String },

    #[error("column `{name}` not present in input")]
    UnknownColumn { name: String },

    #[error(
        "series of length {len} cannot yield a {time_steps}-step window plus a {horizon}-step target"
    )]
    InsufficientData {
        len: usize,
        time_steps: usize,
        horizon: usize,
    },

    #[error("training data has zero range (every value equals {value})")]
    ZeroRange { value: f64 },

    #[error("series contains missing cells; forecasting requires a dense series")]
    MissingValues,

    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{n} pairs remain after filtering; at least 2 are required")]
    TooFewPairs { n: usize },

    #[error("target column `{name}` is constant; ranking against it is undefined")]
    TargetConstant { name: String },

    #[error("{n} runs provided; at least 2 are required")]
    TooFewRuns { n: usize },

    #[error("series of length {len} is too short for the window-length sweep (minimum {min})")]
    SeriesTooShort { len: usize, min: usize },

    #[error("window contains a negative value; the squaring construction needs non-negative input")]
    NonPositiveWindow,

    #[error("expected a window of {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("clean build fails the relation suite, kill matrix aborted: {details}")]
    CleanBuildFails { details: String },

    #[error("unknown fault id `{id}`")]
    UnknownFault { id: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
