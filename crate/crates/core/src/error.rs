use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite coordinate {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: f64 },

    #[error("matrix is not hyperbolic: eigenvalue of modulus {modulus} on or near the unit circle")]
    NotAnosov { modulus: f64 },

    #[error("invalid deformation sites: {0}")]
    InvalidSites(String),

    #[error("parameter `{name}` out of range: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("angle undefined: subspace is not a graph over the reference (smallest singular value {sigma:.3e})")]
    AngleUndefined { sigma: f64 },

    #[error("splitting frame is ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("zero vector has no cone membership")]
    ZeroVector,

    #[error("overflow in Jacobian products after {steps} steps")]
    Overflow { steps: usize },

    #[error("non-finite value in Jacobian product at step {step}")]
    NanJacobian { step: usize },

    #[error("fixed-point iteration did not converge in {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("local stable manifold did not settle: sup distance {distance:.3e} between consecutive constructions")]
    PatchNotSettled { distance: f64 },

    #[error("resolution budget exceeded: {needed} samples required, budget {budget}")]
    ResolutionBudget { needed: usize, budget: usize },

    #[error("fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("disk is not tangent to the cone: aperture {aperture:.4} exceeds {limit:.4}")]
    DiskNotInCone { aperture: f64, limit: f64 },

    #[error("degenerate tangency between stable patch and target disk (singular value {sigma:.3e})")]
    DegenerateTangency { sigma: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
