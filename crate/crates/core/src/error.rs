use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid dimension {0}: su(N) needs N >= 2")]
    InvalidDimension(usize),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}x{expected}, found {found}")]
    DimensionMismatch { expected: usize, found: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("channel is not trace preserving: max |sum M^dag M - I| = {0:.3e}")]
    NotTracePreserving(f64),

    #[error("matrix is not unitary: max |U^dag U - I| = {0:.3e}")]
    NotUnitary(f64),

    #[error("singular channel: smallest singular value of A is {min_singular_value:.3e} (tolerance {tol:.1e})")]
    SingularChannel { min_singular_value: f64, tol: f64 },

    #[error("degenerate observable: Y is proportional to the identity, no information direction")]
    DegenerateObservable,

    #[error("invalid probability p[{index}] = {value:.3e}")]
    InvalidProbability { index: usize, value: f64 },

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("boundary state: E(rho) has min eigenvalue {min_eigenvalue:.3e}, SLD inverse undefined")]
    BoundaryState { min_eigenvalue: f64 },

    #[error("tomography baseline only defined for N = 2, got N = {0}")]
    UnsupportedBaseline(usize),

    #[error("optimality check failed: {0}")]
    OptimalityViolation(String),

    #[error("quadrature did not reach tolerance: estimate {estimate:.6e}, error {error:.3e}, target {target:.3e}")]
    QuadratureAccuracy { estimate: f64, error: f64, target: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid spec at `{path}`: {message}")]
    Spec { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
