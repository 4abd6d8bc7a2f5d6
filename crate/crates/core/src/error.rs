use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("frame undefined at {point:?}: |X| = {w:.3e}, |curl X| = {curl:.3e}")]
    FrameUndefined { point: [f64; 3], w: f64, curl: f64 },

    #[error("field is not a simple rotation (X·curl X residuals {residual:.3e} > {tolerance:.3e})")]
    NotSimpleRotation { residual: f64, tolerance: f64 },

    #[error("conformal Killing field is identically zero")]
    ZeroField,

    #[error("unknown identity `{0}`")]
    UnknownIdentity(String),

    #[error("field is not admissible ({0})")]
    NotAdmissible(String),

    #[error("integral curve escaped |x| > {radius:.1e} at t = {t:.6}")]
    BlowUp { t: f64, radius: f64 },

    #[error("integral curve is not closed")]
    NotClosed,

    #[error("magnetic field not parallel to X at {point:?} (residual {residual:.3e})")]
    NotParallel { point: [f64; 3], residual: f64 },

    #[error("test spinor violates its support requirement: {0}")]
    SupportViolation(String),

    #[error("zero-mode construction failed: {0}")]
    ConstructionFailed(String),

    #[error("grid dimension {dim} exceeds the configured cap {cap}")]
    OutOfMemory { dim: usize, cap: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
