use thiserror::Error;

use crate::state::DensityMatrix;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: max |rho - rho^dagger| = {0:e}")]
    NotHermitian(f64),

    #[error("trace is not one: |trace - 1| = {0:e}")]
    TraceNotOne(f64),

    #[error("matrix is not positive semidefinite: min eigenvalue = {0:e}")]
    NotPositive(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("eigenvectors are not orthonormal: max |U^dagger U - I| = {0:e}")]
    NotOrthonormal(f64),

    #[error("expected {expected} eigenvalues, got {got}")]
    EigenvalueCount { expected: usize, got: usize },

    #[error("theta = {0} is outside [0, pi/2]")]
    ThetaOutOfRange(f64),

    #[error("phi = {0} is not finite")]
    PhiNotFinite(f64),

    #[error("joint probability entry ({a}, {b}) is negative: {value:e}")]
    NegativeProbability { a: usize, b: usize, value: f64 },

    #[error("|cos phi| = {0:e} is too small for the normalized coherence term")]
    PhaseSingularity(f64),

    #[error("experiment plan is invalid: {0}")]
    InvalidPlan(String),

    #[error("histogram has no successful post-selections")]
    NoSuccessfulPostSelections,

    #[error("coherence weight |P_C| = {0:e} is too small for background subtraction")]
    CoherenceWeightTooSmall(f64),

    #[error("decomposition is degenerate ({0}): marginal recovery is impossible")]
    DegenerateDecomposition(&'static str),

    #[error("phases are not independent: tan(phi1) = {0}, tan(phi2) = {1}")]
    PhasesNotIndependent(f64, f64),

    #[error("phase grid is not uniform on [0, 2pi): {0}")]
    NonUniformPhaseGrid(String),

    #[error("measurement strength theta = {0} gives zero visibility")]
    DegenerateStrength(f64),

    #[error("overlap |<b={b}|a={a}>| = {value:e} vanishes: state is not reconstructible in these bases")]
    VanishingOverlap { a: usize, b: usize, value: f64 },

    #[error("reconstructed matrix is not a valid state ({reason}); nearest physical state is {distance:e} away in trace distance")]
    StateValidationFailed {
        reason: String,
        projected: Box<DensityMatrix>,
        distance: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
