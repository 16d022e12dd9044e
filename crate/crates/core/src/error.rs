use std::io;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is singular (pivot {pivot:e} below threshold)")]
    Singular { pivot: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("input outside the domain of {function}: {reason}")]
    Domain { function: &'static str, reason: String },

    #[error("overflow while computing {0}")]
    Overflow(&'static str),

    #[error("non-finite value {0}")]
    NonFinite(f64),

    #[error("exponent {exponent} outside the representable range [{min}, {max}] of {scheme}")]
    ExponentRange { scheme: &'static str, exponent: i32, min: i32, max: i32 },

    #[error("malformed token sequence: {0}")]
    Malformed(String),

    #[error("resource budget exceeded: {needed} scalar weights requested, budget is {budget}")]
    Budget { needed: u64, budget: u64 },

    #[error("certification failed: sampled error {measured:e} exceeds target {target:e}")]
    Certification { measured: f64, target: f64 },

    #[error("rejection cap of {cap} draws exceeded while sampling {function}")]
    RejectionCap { function: &'static str, cap: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at step {step}: loss is {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("manifest mismatch: {0}")]
    Manifest(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
