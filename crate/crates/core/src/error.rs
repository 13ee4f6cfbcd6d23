use thiserror::Error;

/// Errors produced by the numerical kernels and the applications built on them.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A factorization met a column whose residual norm fell below the
    /// rank threshold. `column` is zero-based.
    #[error("rank deficiency at column {column} (zero-based){}", .iteration.map(|it| format!(" during power iteration {it}")).unwrap_or_default())]
    RankDeficient { column: usize, iteration: Option<usize> },

    #[error("degenerate clustering: {0}")]
    DegenerateClustering(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        LabError::ShapeMismatch(msg.into())
    }

    /// True for failures caused by the numbers rather than by the caller.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LabError::RankDeficient { .. } | LabError::DegenerateClustering(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
