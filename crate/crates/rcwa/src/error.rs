//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RcwaError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("degenerate geometry: mandatory slice boundaries at {0} and {1} are closer than {2}")]
    DegenerateGeometry(f64, f64, f64),

    #[error("invalid slicing: {0}")]
    InvalidSlicing(String),

    #[error("invalid incident wave: {0}")]
    InvalidIncident(String),

    #[error("Rayleigh anomaly: alpha_n^2 coincides with kappa^2*eps for order n = {order} on the {side} side")]
    RayleighAnomaly { order: i64, side: char },

    #[error("eigensolver failure in slice {slice}: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    EigSolverFailure {
        slice: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error(
        "defective modal matrix in slice {slice} (condition number {cond:.3e}); \
         perturbing the permittivity by ~1e-12 usually splits the degenerate eigenvalues"
    )]
    DefectiveModes { slice: usize, cond: f64 },

    #[error("singular mode-matching system at interface {0}")]
    SingularInterface(usize),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("reference solution is not fine enough: {0}")]
    InvalidReference(String),

    #[error("reference field has zero norm")]
    ZeroReference,

    #[error("need at least 3 usable points for a rate fit, got {0}")]
    InsufficientPoints(usize),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RcwaError>;
