use alloc::string::String;

/// Errors raised by the tensor algebra, decompositions and learners.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("inverse FFT left an imaginary residue of {residue:e} (limit {limit:e})")]
    SymmetryViolation { residue: f64, limit: f64 },
    #[error("matrix decomposition failed: {0}")]
    DecompositionError(String),
    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("normal equations are numerically singular in Fourier slice {slice}")]
    SingularSystem { slice: usize },
    #[error("mask observes no rows")]
    EmptyMask,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("patch {p}x{q}x{depth} does not fit a {h}x{w}x{b} volume")]
    PatchTooLarge {
        p: usize,
        q: usize,
        depth: usize,
        h: usize,
        w: usize,
        b: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SymmetryViolation { .. } | Error::DecompositionError(_) | Error::SingularSystem { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
