use thiserror::Error;

/// Failure modes shared across the crate. Every variant carries enough
/// context to reconstruct what was being computed when it fired.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("PRODUCT_VANISHED at step {step}: partial product became the zero matrix")]
    ProductVanished { step: usize },

    #[error("NO_CONVERGENCE in {routine} after {iterations} iterations")]
    NoConvergence { routine: &'static str, iterations: usize },

    #[error("NOT_SQUARE: matrix is {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("ZERO_MATRIX: operation undefined on the zero matrix")]
    ZeroMatrix,

    #[error("NOT_CONVERGED at depth {depth}: cauchy gap {gap:.3e} above tol {tol:.3e}")]
    NotConverged { depth: usize, gap: f64, tol: f64 },

    #[error("BAD_CHECKPOINTS: {reason}")]
    BadCheckpoints { reason: String },

    #[error("DIMENSION_TOO_SMALL: d = {dim}, need at least {min}")]
    DimensionTooSmall { dim: usize, min: usize },

    #[error("NOT_STOCHASTIC: {reason}")]
    NotStochastic { reason: String },

    #[error("SEARCH_EXHAUSTED at block {index}: no exponent up to {cap} works")]
    SearchExhausted { index: usize, cap: u32 },

    #[error("EIGENVALUE_NOT_ONE: no nonnegative fixed vector, residual {residual:.3e}")]
    EigenvalueNotOne { residual: f64 },

    #[error("WORD_TOO_SHORT: need length >= {needed}, got {got}")]
    WordTooShort { needed: usize, got: usize },

    #[error("ZERO_IMAGE: letter {symbol} sends the image below {floor:.1e}")]
    ZeroImage { symbol: usize, floor: f64 },

    #[error("NO_FACTORIZATION of {word:?} at position {position}")]
    NoFactorization { word: String, position: usize },

    #[error("CHECK_FAILED({case}): {detail}")]
    CheckFailed { case: String, detail: String },

    #[error("HORIZON_TOO_SHORT: no stable window within horizon {horizon}")]
    HorizonTooShort { horizon: usize },

    #[error("NOT_TRIANGULAR: factor {index} is not triangular")]
    NotTriangular { index: usize },

    #[error("ZERO_DIAGONAL: factor {index} has a zero diagonal entry")]
    ZeroDiagonal { index: usize },

    #[error("INCONCLUSIVE_FINITENESS: series {series} neither settles nor grows")]
    InconclusiveFiniteness { series: String },

    #[error("DIMENSION_MISMATCH: expected {expected}, got {got} in {context}")]
    DimensionMismatch { expected: String, got: String, context: &'static str },

    #[error("INVALID: {0}")]
    Invalid(String),
}

impl Error {
    /// Stable machine-readable code, used by the CLI's JSON error channel.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ProductVanished { .. } => "PRODUCT_VANISHED",
            Error::NoConvergence { .. } => "NO_CONVERGENCE",
            Error::NotSquare { .. } => "NOT_SQUARE",
            Error::ZeroMatrix => "ZERO_MATRIX",
            Error::NotConverged { .. } => "NOT_CONVERGED",
            Error::BadCheckpoints { .. } => "BAD_CHECKPOINTS",
            Error::DimensionTooSmall { .. } => "DIMENSION_TOO_SMALL",
            Error::NotStochastic { .. } => "NOT_STOCHASTIC",
            Error::SearchExhausted { .. } => "SEARCH_EXHAUSTED",
            Error::EigenvalueNotOne { .. } => "EIGENVALUE_NOT_ONE",
            Error::WordTooShort { .. } => "WORD_TOO_SHORT",
            Error::ZeroImage { .. } => "ZERO_IMAGE",
            Error::NoFactorization { .. } => "NO_FACTORIZATION",
            Error::CheckFailed { .. } => "CHECK_FAILED",
            Error::HorizonTooShort { .. } => "HORIZON_TOO_SHORT",
            Error::NotTriangular { .. } => "NOT_TRIANGULAR",
            Error::ZeroDiagonal { .. } => "ZERO_DIAGONAL",
            Error::InconclusiveFiniteness { .. } => "INCONCLUSIVE_FINITENESS",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::Invalid(_) => "INVALID",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
