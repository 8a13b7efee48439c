use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid sparse matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),

    #[error("matrix market parse error at line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error("dimension {n} exceeds the dense eigensolver cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    EigenNoConvergence { sweeps: usize, off_norm: f64 },

    #[error("operator is not positive definite along the current gradient (g'Ag = {g_a_g:e})")]
    Indefinite { g_a_g: f64 },

    #[error("operator is singular along the current gradient (||Ag|| = 0 with g != 0)")]
    Singular,

    #[error("{0} requires the previous iterate's quotients")]
    Sequencing(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid spectral model: {0}")]
    Spectrum(String),

    #[error("asymptotic regime not reached: {0}")]
    NotConverged(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
