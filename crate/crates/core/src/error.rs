use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("Pauli projection has imaginary residue {residue:.3e}")]
    NotHermitianInput { residue: f64 },

    #[error("invalid Bell-diagonal coefficients: {0}")]
    InvalidBellCoefficients(String),

    #[error("qubit frequency must be positive and finite, got {0}")]
    InvalidFrequency(f64),

    #[error("invalid constraint set: {0}")]
    InvalidConstraintSet(String),

    #[error("invalid perturbation config: {0}")]
    InvalidConfig(String),

    #[error("multiplier solve diverged after {iterations} iterations (residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("constrained state is not physical (min eigenvalue {min_eigenvalue:.3e})")]
    NonPhysicalResult { min_eigenvalue: f64 },

    #[error("solver failure rate too high: {failures} failures in {attempts} attempts")]
    TooManyFailures { failures: usize, attempts: usize },

    #[error("value {value} outside the domain of {function}")]
    DomainExcursion { function: &'static str, value: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("normalization violated: sum of squared coefficients is {0}")]
    NormalizationViolation(f64),

    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },

    #[error("validation error at index {index}: {reason}")]
    Validation { index: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SolverDiverged { .. } | Error::TooManyFailures { .. } => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
