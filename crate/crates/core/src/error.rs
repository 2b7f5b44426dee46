//! Shared error type for the whole crate.

use thiserror::Error;

/// Errors raised by domain, quadrature, kernel and metric operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid domain parameter: {0}")]
    InvalidDomain(String),

    #[error("no sampling plan for this domain; truncate first")]
    NoSamplingPlan,

    #[error("evaluation failed at {point}: {reason}")]
    Evaluation { point: String, reason: String },

    #[error("kernel pole: 1 - t*exp(kappa*s) vanishes at ({z}, {w})")]
    KernelPole { z: String, w: String },

    #[error("kernel not positive at point; Bergman form undefined (K = {value})")]
    KernelNotPositive { value: f64 },

    #[error("Gram matrix numerically singular (condition estimate {cond:.3e})")]
    SingularGram { cond: f64 },

    #[error("degree {degree} exceeds the sampling variance bound {max} for Egg(kappa={kappa})")]
    DegreeBound { degree: u32, max: u32, kappa: f64 },

    #[error("empty candidate family")]
    EmptyFamily,

    #[error("point outside the open unit disc: |{0}| >= 1")]
    OutsideDisc(String),

    #[error("candidate disqualified: |F| >= 1 at {point}")]
    Disqualified { point: String },

    #[error("peak assembly refused: {reason} at witness {point}")]
    AssemblyRefused { reason: String, point: String },

    #[error("polynomial is not weighted-homogeneous for the given weights")]
    NotWeightedHomogeneous,

    #[error("comparison inapplicable: K(p,p) <= 0")]
    ComparisonInapplicable,

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
