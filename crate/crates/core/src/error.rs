use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("E is not symmetric positive definite")]
    NotPd,

    #[error("G is not symmetric positive semidefinite")]
    NotPsd,

    #[error("ill-posed model: N + P = {n_plus_p} does not exceed M = {m}")]
    IllPosed { n_plus_p: usize, m: usize },

    #[error("G is proportional to H^T E^-1 H (normalized difference {0:e})")]
    Degenerate(f64),

    #[error("H^T E^-1 H + lambda G is not positive definite at lambda = {0}")]
    SingularSystem(f64),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),

    #[error("data vector contains non-finite values")]
    NonFinite,

    #[error("degenerate Fisher information: c_det = {0:e}")]
    DegenerateFisher(f64),

    #[error("second-moment matrix is inconsistent with the model null space: {0}")]
    NullSpaceMismatch(String),

    #[error("expected a positive value, got {0}")]
    NonPositive(f64),

    #[error("U_* + lambda V_* vanishes; data lies in the degenerate subspace")]
    ZeroCost,

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("no interior solution; iterate escaped towards {0}")]
    NoInteriorSolution(String),

    #[error("unknown tag `{0}`")]
    UnknownTag(String),

    #[error("optimum on the search box edge at lambda = {lambda}")]
    BoundaryHit { lambda: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("too many failed trials: {failed} of {total} ({detail})")]
    TrialFailures {
        failed: usize,
        total: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
