use thiserror::Error;

/// Errors produced by analysis, meshing, assembly and time stepping.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error(
        "coupling violates the compatibility condition \
         (beta1 - alpha1)(kappa2 - alpha2) - kappa1*beta2 = 0: residual {residual:e}"
    )]
    Incompatible { residual: f64 },

    #[error("exchange terms do not vanish at the uniform steady state: h1 = {h1:e}, h2 = {h2:e}")]
    SteadyStateExchange { h1: f64, h2: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("mesh refinement level {level} exceeds the limit of {max}")]
    RefinementTooDeep { level: usize, max: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-manifold boundary: {} offending face(s), first {:?}", faces.len(), faces.first())]
    NonManifold { faces: Vec<[usize; 3]> },

    #[error("degenerate {kind} element {index} (measure {measure:e})")]
    DegenerateElement {
        kind: &'static str,
        index: usize,
        measure: f64,
    },

    #[error("size mismatch: {what} has length {got}, expected {expected}")]
    SizeMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("linear solver failed after {iterations} iterations (relative residual {residual:e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("linear solver breakdown: {0}")]
    Breakdown(String),

    #[error("Newton failed to converge in {iterations} iterations (last residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {value}"),
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be strictly positive, got {value}"),
        })
    }
}
