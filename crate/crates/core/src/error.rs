//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Two aggregates (or an aggregate and an update) disagree on layer shape.
    #[error("shape mismatch at layer {layer}: {left} vs {right} elements")]
    ShapeMismatch {
        layer: usize,
        left: usize,
        right: usize,
    },

    /// `finalize` was called on an aggregate that absorbed nothing.
    #[error("cannot finalize an empty aggregate")]
    EmptyAggregate,

    /// A job/party/cluster configuration is internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Regression input where all x values coincide.
    #[error("degenerate regression design: all {n} points share x = {x}")]
    DegenerateDesign { n: usize, x: f64 },

    /// Not enough points to fit a line.
    #[error("linear fit needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    /// No calibration model for the party's hardware class.
    #[error("no calibration model for the {vcpus}-vCPU class (party {party})")]
    MissingCalibration { vcpus: u32, party: String },

    /// Fewer benchmark trials than the minimum the estimator tolerates.
    #[error("microbenchmark needs at least {min} trials, got {got}")]
    TooFewTrials { min: usize, got: usize },

    /// The event queue drained before every round completed.
    #[error("simulation deadlock: {0}")]
    Deadlock(String),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
