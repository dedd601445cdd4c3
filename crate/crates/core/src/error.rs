use thiserror::Error;

/// Errors produced by the numerical kernels, the problem model and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (|a[{row},{col}] - a[{col},{row}]| = {gap})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix has a negative eigenvalue {eigenvalue}")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("information matrix is singular (smallest eigenvalue {min_eigenvalue})")]
    SingularInformation { min_eigenvalue: f64 },

    #[error("configuration rank < 3 (smallest eigenvalue of HᵀH is {min_eigenvalue})")]
    RankDeficient { min_eigenvalue: f64 },

    #[error("sensing axis {row} has norm {norm}, expected unit norm")]
    NotUnitNorm { row: usize, norm: f64 },

    #[error("at least 3 sensors are required, got {0}")]
    TooFewSensors(usize),

    #[error("matrix is not orthogonal (‖CᵀC − I‖_F = {defect})")]
    NotOrthogonal { defect: f64 },

    #[error("non-finite value encountered")]
    NonFinite,

    #[error("quartic is unbounded below (a = {a}, b = {b}, c = {c}, d = {d})")]
    UnboundedBelow { a: f64, b: f64, c: f64, d: f64 },

    #[error("coordinate ({row}, {col}) out of range for a 3×3 matrix")]
    IndexOutOfRange { row: usize, col: usize },

    #[error("could not draw a full-rank initial configuration after {attempts} attempts")]
    DegenerateInit { attempts: usize },

    #[error("degenerate update direction for sensor {row} at outer iteration {iteration}")]
    DegenerateDirection { iteration: usize, row: usize },

    #[error(
        "linearized information matrix is not positive definite (min eigenvalue {min_eigenvalue})"
    )]
    SurrogateIndefinite { min_eigenvalue: f64 },

    #[error("invalid sensor count {m} for {kind}")]
    InvalidSensorCount { kind: &'static str, m: usize },

    #[error("invalid setting: {0}")]
    InvalidSettings(String),

    #[error("minimum {minimum} samples, got {requested}")]
    TooFewSamples { minimum: usize, requested: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
