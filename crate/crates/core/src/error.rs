use num_complex::Complex64;
use thiserror::Error;

use crate::model::Curvature;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("x = {x} lies outside the strip domain for curvature {curvature:?} (|x| must be < pi/2)")]
    Domain { curvature: Curvature, x: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("boundary data violates its constraint: {0}")]
    ConstraintViolation(String),

    #[error("operation needs a curved problem (K = +1 or K = -1), got {0:?}")]
    InvalidCurvature(Curvature),

    #[error("step size underflow while integrating at lambda = {lambda} ({steps} steps)")]
    StepUnderflow { lambda: Complex64, steps: usize },

    #[error("lambda = {lambda} is not an eigenvalue (boundary residual {residual:e})")]
    NotAnEigenvalue { lambda: Complex64, residual: f64 },

    #[error("contour passes through a zero of the characteristic function near {0}")]
    ContourThroughZero(Complex64),

    #[error("phase refinement overflow on contour segment starting at {0}")]
    PhaseRefinementOverflow(Complex64),

    #[error("root refinement did not converge near {lambda} after {iterations} iterations")]
    NonConvergence { lambda: Complex64, iterations: usize },

    #[error("eigenvalue {0} has no complex-conjugate partner")]
    UnpairedEigenvalue(Complex64),

    #[error("eigenvalue {0} is degenerate")]
    DegenerateEigenvalue(Complex64),

    #[error("eigenvalue counts disagree: expected {expected}, found {found}")]
    PairingFailure { expected: usize, found: usize },

    #[error("QR iteration did not converge for eigenvalue index {index}")]
    QrNonConvergence { index: usize },

    #[error("branch matching is ambiguous at parameter {parameter}")]
    BranchAmbiguity { parameter: f64 },

    #[error("no real solution: {0}")]
    NoRealSolution(String),
}
