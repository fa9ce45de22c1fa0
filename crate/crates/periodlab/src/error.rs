use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeriodError {
    #[error("quadrature did not converge: estimate {estimate}, error {error:e}")]
    NonConvergent { estimate: String, error: f64 },
    #[error("integrand is singular or non-finite on the path near {at}")]
    SingularOnPath { at: String },
    #[error("path endpoints do not match: {0}")]
    EndpointMismatch(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("form has a pole on the integration region: {0}")]
    PoleOnRegion(String),
    #[error("unsupported region: {0}")]
    UnsupportedRegion(String),
    #[error("series diverges: {0}")]
    Divergent(String),
    #[error("argument lies on a singular divisor: {0}")]
    OnSingularDivisor(String),
    #[error("cannot continue along the requested loop: {0}")]
    UnsupportedContinuation(String),
    #[error("invalid variety/divisor pair: {0}")]
    InvalidPair(String),
    #[error("invalid element: {0}")]
    InvalidElement(String),
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),
    #[error("rational recognition failed: value {value}, residual {residual:e}")]
    RecognitionFailed { value: String, residual: f64 },
    #[error("matrix is not invertible")]
    NonInvertible,
    #[error("division by a non-monomial expression: {0}")]
    NonMonomialDivision(String),
    #[error("matrix is not unipotent")]
    NotUnipotent,
    #[error("atom decomposition does not match numeric entry {entry}: deviation {deviation:e}")]
    AtomMismatch { entry: String, deviation: f64 },
    #[error("point lies on the lattice: {0}")]
    OnLattice(String),
    #[error("cubic is singular: {0}")]
    SingularCurve(String),
    #[error("degenerate lattice: {0}")]
    DegenerateLattice(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, PeriodError>;
