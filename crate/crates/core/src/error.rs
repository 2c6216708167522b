use thiserror::Error;

/// Errors raised by the geometry, path, diagnostic and model layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vector norm {norm:e} is below the floor {floor:e}; direction undefined")]
    NearZeroNorm { norm: f64, floor: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("radius mismatch: {r0} vs {r1} (relative tolerance {tol:e})")]
    RadiusMismatch { r0: f64, r1: f64, tol: f64 },

    #[error("vector is not tangent at the base point: |<v, p>| = {inner:e} exceeds {bound:e}")]
    NotTangent { inner: f64, bound: f64 },

    #[error("point is off the sphere of radius {radius}: norm {norm}")]
    OffSphere { norm: f64, radius: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("shell {which} has zero radial spread; use an exact-radius check instead")]
    DegenerateShell { which: usize },

    #[error("unknown condition id {id} (field has {classes} classes)")]
    UnknownCondition { id: usize, classes: usize },

    #[error("training diverged at step {step}: loss {loss}")]
    DivergenceDetected { step: usize, loss: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
