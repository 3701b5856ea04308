use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigenvalue iteration did not converge within {sweeps} sweeps (dim {dim})")]
    NonConvergence { dim: usize, sweeps: usize },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is singular or not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    Singular { min_eigenvalue: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("channel is not trace preserving (max deviation {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },

    #[error("Choi matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("value {value} outside allowed range {range}")]
    OutOfRange { value: f64, range: &'static str },

    #[error("no eigenvalue within {tolerance:.1e} of 1 (closest distance {distance:.3e})")]
    NoFixedPoint { distance: f64, tolerance: f64 },

    #[error("fixed space is degenerate: {count} eigenvalues on or near the unit circle")]
    DegenerateFixedSpace { count: usize },

    #[error("rank-one channels are unitary and never converge")]
    RankOne,

    #[error("two-qubit decomposition failed: reconstruction error {error:.3e}")]
    DecompositionFailure { error: f64 },

    #[error("malformed histogram{}: {message}", location.as_deref().map(|l| format!(" at {l}")).unwrap_or_default())]
    MalformedHistogram { location: Option<String>, message: String },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("reports are not comparable: {0}")]
    IncompatibleConfigs(String),

    #[error("{failed} of {total} ensemble members failed (first: {first})")]
    TooManyFailures { failed: usize, total: usize, first: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(location: impl Into<Option<String>>, message: impl Into<String>) -> Self {
        Error::MalformedHistogram {
            location: location.into(),
            message: message.into(),
        }
    }
}
