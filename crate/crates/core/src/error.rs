use std::path::PathBuf;

/// Errors raised by mesh construction, assembly, the linear solvers and the
/// experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("degenerate triangle (signed area {area:e})")]
    DegenerateTriangle { area: f64 },

    #[error("mesh of size r={r}, k={k} overflows the vertex index type")]
    MeshTooLarge { r: usize, k: u32 },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("sparse Cholesky factorization failed: {0}")]
    Factorization(String),

    #[error("{stage} sub-solve failed: {source}")]
    SubSolve {
        stage: SubSolveStage,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The three linear solves making up one iteration step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SubSolveStage {
    /// Heterogeneous solve for the fine-scale correction `u0`.
    FineCorrection,
    /// Homogenized solve for the coarse correction `ū`.
    Homogenized,
    /// Heterogeneous solve for the post-correction `ũ`.
    PostCorrection,
}

impl std::fmt::Display for SubSolveStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SubSolveStage::FineCorrection => "u0",
            SubSolveStage::Homogenized => "ubar",
            SubSolveStage::PostCorrection => "utilde",
        })
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
