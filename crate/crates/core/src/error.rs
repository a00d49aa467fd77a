use thiserror::Error;

/// Everything that can go wrong while building or solving an instance.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("distance matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("metric space needs at least 2 points, got {size}")]
    TooFewPoints { size: usize },

    #[error("distance matrix is asymmetric at ({i},{j})/({j},{i})")]
    AsymmetricMatrix { i: usize, j: usize },

    #[error("distance matrix has a nonzero diagonal entry at ({i},{i})")]
    NonzeroDiagonal { i: usize },

    #[error("negative or non-finite distance at ({i},{j})")]
    NegativeDistance { i: usize, j: usize },

    #[error("triangle inequality violated: d({i},{k}) > d({i},{j}) + d({j},{k})")]
    TriangleViolation { i: usize, j: usize, k: usize },

    #[error("all points coincide in both spaces, nothing to normalize")]
    DegenerateSpace,

    #[error("distortion gap needs {work} difference values, limit is {limit}")]
    WorkLimitExceeded { work: u128, limit: u128 },

    #[error("c^d_max = {c}^{d_max} would exceed the overflow guard 1e300")]
    OverflowRisk { c: f64, d_max: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("computation produced a non-finite value")]
    NonFiniteResult,

    #[error("distortion gap must be positive, got {0}")]
    NonpositiveGap(f64),

    #[error("enumeration of {count} items exceeds the limit {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("invalid net parameter: {0}")]
    InvalidDelta(String),

    #[error("no connected graph after {attempts} attempts")]
    ConnectivityTimeout { attempts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Errors caused by limits on work or numeric range rather than by bad input.
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            Error::WorkLimitExceeded { .. } | Error::OverflowRisk { .. } | Error::TooLarge { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
