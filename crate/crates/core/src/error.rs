//! Error types shared across the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// One rejected row from a lenient parse, with enough context to fix the file.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RowDiagnostic {
    /// 1-based data-row number (header excluded).
    pub row: usize,
    pub message: String,
}

impl std::fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "row {}: {}", self.row, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    /// Strict-mode parse failure: every offending row is listed.
    #[error("{} row(s) rejected; first: {}", .0.len(), .0.first().map(|d| d.to_string()).unwrap_or_default())]
    RowErrors(Vec<RowDiagnostic>),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input data rather than bad usage.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Schema(_) | Error::RowErrors(_) | Error::Validation(_)
        )
    }
}
