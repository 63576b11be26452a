use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative exponent evaluated at a zero argument")]
    ZeroBaseNegativeExponent,

    #[error("coefficient at z^{i} w^{j} lies outside the degree box [0,{n}]x[0,{m}]")]
    SupportOutsideBox { i: i32, j: i32, n: usize, m: usize },

    #[error("the zero polynomial has no associated measure")]
    ZeroPolynomial,

    #[error("root of modulus {modulus} is within {band:e} of the unit circle; grid test is inconclusive")]
    InconclusiveNearBoundary { modulus: f64, band: f64 },

    #[error("polynomial is not stable on the closed bidisk")]
    NotStable,

    #[error("moment computation did not converge (grid {grid}, estimated error {est_error:e})")]
    NoConvergence { grid: usize, est_error: f64 },

    #[error("series truncation {trunc} too small (doubling changed moments by {change:e})")]
    TruncationTooSmall { trunc: usize, change: f64 },

    #[error("moment index ({a},{b}) is outside the table window")]
    WindowTooSmall { a: i32, b: i32 },

    #[error("degree in w must be at least 1 (and in z, where required)")]
    DegenerateDegree,

    #[error("kernel coefficient kept a negative z exponent ({exponent})")]
    NegativeExponentResidue { exponent: i32 },

    #[error("division by (1 - w conj(eta)) left a remainder of size {residual:e}")]
    NonzeroRemainder { residual: f64 },

    #[error("Gram matrix condition number {condition:e} exceeds the limit")]
    IllConditionedGram { condition: f64 },

    #[error("linear system is rank deficient")]
    RankDeficient,

    #[error("pivot {pivot:e} at step {index} is not positive")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid subspace: {0}")]
    InvalidSubspace(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
