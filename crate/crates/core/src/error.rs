use thiserror::Error;

/// Errors raised by medium validation and the numerical engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("layer {layer}: diffusion matrix is not positive definite (smallest eigenvalue {min_eigenvalue})")]
    NonPositiveDefinite { layer: usize, min_eigenvalue: f64 },

    #[error("layer {layer}: {name} must be positive, got {value}")]
    NonPositive {
        layer: usize,
        name: &'static str,
        value: f64,
    },

    #[error("layer {layer}: growth rate must be nonnegative, got {value}")]
    NegativeGrowth { layer: usize, value: f64 },

    #[error("interface position m = {0} must lie strictly inside (0, 1)")]
    InterfaceOutOfRange(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("weights ({p1}, {p2}) are not on the simplex")]
    NotOnSimplex { p1: f64, p2: f64 },

    #[error("could not isolate the principal root: {0}")]
    BracketingFailure(String),

    #[error("numerical overflow in {0}")]
    NumericalOverflow(&'static str),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("mixed diffusion matrix is singular")]
    SingularMixture,

    #[error("could not bracket the root of {0}")]
    BracketFailure(&'static str),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("time step rejected: {0}")]
    StepSizeRejected(String),

    #[error("y-grid has no node on the interface")]
    GridMissesInterface,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
