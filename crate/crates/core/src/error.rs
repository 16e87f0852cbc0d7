use thiserror::Error;

/// Errors raised by mesh construction, discretization and solves.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpxaError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid mesh file: {0}")]
    MeshFile(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index ({row}, {col}) out of range for {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("singular local system at vertex {vertex} (pivot {pivot:.3e} in row {row})")]
    SingularLocalSystem { vertex: usize, row: usize, pivot: f64 },

    #[error("rank deficient local minimization at vertex {vertex}: {detail}")]
    RankDeficientKkt { vertex: usize, detail: String },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("solve residual {achieved:.3e} exceeds bound {bound:.1e}")]
    ResidualTooLarge { achieved: f64, bound: f64 },

    #[error("no convergence after {iterations} iterations (last change {last_change:.3e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("matrix too large for dense inverse: {n} > {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, MpxaError>;

impl From<std::io::Error> for MpxaError {
    fn from(e: std::io::Error) -> Self {
        MpxaError::Io(e.to_string())
    }
}
