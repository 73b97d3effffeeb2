use thiserror::Error;

/// Errors raised by the simulator. Numeric payloads are reported in `f64`
/// regardless of the working scalar type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("point {point:?} lies outside the dirichlet domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("unsupported hamiltonian: {0}")]
    UnsupportedHamiltonian(String),

    #[error("degenerate test field: {0}")]
    DegenerateTest(String),

    #[error("hermiticity violation: imaginary part of expectation is {imaginary:e}")]
    HermiticityViolation { imaginary: f64 },

    #[error("stability bound violated: dt = {dt:e} exceeds {limit:e} ({reason})")]
    Stability { dt: f64, limit: f64, reason: String },

    #[error("caustic: action field became non-finite at t = {time}")]
    Caustic { time: f64 },

    #[error("node: {detail}")]
    Node { detail: String },

    #[error("linear solve did not converge: residual {residual:e} after {iterations} iterations")]
    Solver { residual: f64, iterations: usize },

    #[error("density lost positivity at t = {time}")]
    Positivity { time: f64 },

    #[error("pointer packets overlap: gap/width ratio {ratio} is below {required}")]
    UnresolvableOutcomes { ratio: f64, required: f64 },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
