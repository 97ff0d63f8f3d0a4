use thiserror::Error;

/// Errors raised anywhere in the integration pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CpdError {
    #[error("rotation axis must be a unit vector (|n| = {norm})")]
    NonUnitAxis { norm: f64 },

    #[error("inverse derivative applied to a field with nonzero mean ({mean:e})")]
    NonZeroMean { mean: f64 },

    #[error("grid size must be even and positive, got {0}")]
    BadGrid(usize),

    #[error("field dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("initial-data order {0} is not supported (maximum is 4)")]
    InitOrderTooHigh(usize),

    #[error(
        "initial-data recursion at level {level}: difference bracket {bracket:e} exceeds {bound:e}"
    )]
    BracketGuard { level: usize, bracket: f64, bound: f64 },

    #[error("fixed-point stage iteration did not converge after {iterations} iterations (gap {gap:e})")]
    FixedPointDiverged { iterations: usize, gap: f64 },

    #[error("stage solve did not converge (residual {residual:e}); step too large for eps")]
    StageSolveFailed { residual: f64 },

    #[error("non-finite value at t = {t}, node {node}")]
    NonFinite { t: f64, node: usize },

    #[error("numerical solution grew beyond {limit}x its initial bound at t = {t}")]
    Unbounded { t: f64, limit: f64 },

    #[error("magnetic intensity |b| = {value:e} fell below {min:e} at t = {t}")]
    FieldVanishes { t: f64, value: f64, min: f64 },

    #[error("trajectory entered the singular region (r = {r:e}) at t = {t}")]
    SingularRegion { t: f64, r: f64 },

    #[error("reference solution did not reach tolerance {tol:e} (gap {gap:e})")]
    ReferenceNotConverged { tol: f64, gap: f64 },

    #[error("invalid step size {0}")]
    BadStep(f64),

    #[error("unknown method '{0}'")]
    UnknownMethod(String),

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("method '{method}' cannot be applied to problem '{problem}'")]
    Unsupported { method: String, problem: String },

    #[error("tableau '{name}' violates {condition} (residual {residual:e})")]
    TableauCheck {
        name: String,
        condition: String,
        residual: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CpdError>;

impl From<std::io::Error> for CpdError {
    fn from(e: std::io::Error) -> Self {
        CpdError::Io(e.to_string())
    }
}
