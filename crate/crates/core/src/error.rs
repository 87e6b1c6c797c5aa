use thiserror::Error;

/// Errors raised by the solvers, assemblers and file writers of this crate.
#[derive(Debug, Error)]
pub enum PencilError {
    #[error("matrix is not symmetric: |m[{row}][{col}] - m[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("{what} is not positive definite (smallest eigenvalue {min_eig:e})")]
    NotPositiveDefinite { what: String, min_eig: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("|t| = {t} does not exceed the moving-mode threshold T = {threshold}")]
    BelowThreshold { t: f64, threshold: f64 },

    #[error("operation not applicable: {0}")]
    NotApplicable(String),

    #[error("coercivity condition violated: {0}")]
    Coercivity(String),

    #[error("Ker(A) meets Ker(C) nontrivially: {0}")]
    KernelIntersection(String),

    #[error("Ker(B) and Ker(C) share the vector {vector:?}")]
    CommonKernel { vector: Vec<f64> },

    #[error("no principal positive eigenvalue for t = {t}: the integral of the weight is 1 - t >= 0, so the principal eigenvalue is not positive")]
    NoPrincipalRoot { t: f64 },

    #[error("sqrt(lambda) = {sqrt_lambda} is too close to a pole of tan")]
    PoleProximity { sqrt_lambda: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, PencilError>;

impl PencilError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        PencilError::Io { path: path.display().to_string(), source }
    }
}
