use std::path::PathBuf;

/// Errors produced by dataset ingestion, model building and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(
        "header mismatch: expected column {expected:?} at position {position}, found {found:?}"
    )]
    HeaderMismatch {
        position: usize,
        expected: String,
        found: String,
    },

    #[error("row {row}, column {column}: cannot parse {value:?} as number")]
    BadNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("table is empty")]
    EmptyTable,

    #[error("column index {0} out of range")]
    BadColumn(usize),

    #[error("column lengths differ from row count")]
    RaggedColumns,

    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input where at least one value is required")]
    EmptyInput,

    #[error("parallel arrays have mismatched lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("budget of {budget} bytes admits no model (minimum {minimum})")]
    BudgetTooSmall { budget: usize, minimum: usize },

    #[error("enumeration region too large: {0} cells")]
    RegionTooLarge(f64),

    #[error(
        "column domain too large for one-hot encoding ({distinct} distinct values, limit {limit})"
    )]
    DomainTooLarge { distinct: usize, limit: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
