use thiserror::Error;

/// Errors raised by the factorization, oracle, grid and checking routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MtfrError {
    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NonSymmetric(f64),
    #[error("matrix is singular at tolerance (smallest singular value {0:.3e})")]
    Singular(f64),
    #[error("matrix is not unitary (residual {0:.3e})")]
    NonUnitary(f64),
    #[error("matrix is not symplectic (residual {0:.3e})")]
    NotSymplectic(f64),
    #[error("unitary matrix is not free: imaginary part singular (smallest singular value {0:.3e})")]
    NotFree(f64),
    #[error("no admissible rotation phase found after {0} candidates")]
    NoTauFound(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("unsupported dilation on grid: {0}")]
    UnsupportedDilation(String),
    #[error("grid too large: {requested} elements exceeds the limit of {limit}")]
    GridTooLarge { requested: usize, limit: usize },
    #[error("radius {radius} exceeds the grid half-extent {half_extent}")]
    RadiusExceedsGrid { radius: f64, half_extent: f64 },
    #[error("point is not on the grid: {0}")]
    OffGridPoint(String),
    #[error("U^t U is not block-diagonal (off-diagonal norm {0:.3e})")]
    NotBlockDiagonal(f64),
    #[error("factor expected to be real is not (imaginary norm {0:.3e})")]
    RealnessFailure(f64),
    #[error("rank of the coupling block is zero; input was misclassified")]
    RankZero,
    #[error("matrix is real within tolerance; no uncertainty principle applies")]
    RealMatrix,
    #[error("diagonal entry with vanishing imaginary part cannot be normalized to 1: {0}")]
    TrailingNotReal(String),
    #[error("fit is degenerate: {0}")]
    DegenerateFit(String),
    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, MtfrError>;

impl MtfrError {
    /// True for failed internal assertions, as opposed to bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            MtfrError::NumericalFailure(_)
                | MtfrError::RealnessFailure(_)
                | MtfrError::RankZero
                | MtfrError::TrailingNotReal(_)
        )
    }
}
