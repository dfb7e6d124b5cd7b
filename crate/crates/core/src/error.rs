/// Errors produced by the estimation, testing, and simulation routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input shapes are inconsistent (non-square matrix, mismatched replicate
    /// dimensions, covariance size differing from the data, and so on).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The data matrix is numerically rank deficient. `ratio` is the smallest
    /// singular value divided by the largest.
    #[error("rank-deficient matrix: sigma_min/sigma_max = {ratio:.3e} is below {threshold:.3e}")]
    RankDeficient { ratio: f64, threshold: f64 },

    /// A covariance matrix (input or iterate) is not positive definite.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A computation produced NaN or infinity.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A quantile cache file is unreadable or does not match the request.
    #[error("cache error: {0}")]
    Cache(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
