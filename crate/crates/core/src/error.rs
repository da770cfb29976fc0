use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown dataset id: {0}")]
    UnknownDataset(String),

    #[error("csv parse error at row {row}, column {column}: {message}")]
    CsvCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("dataset error: {0}")]
    Data(String),

    #[error("class index {0} out of range (k = {1})")]
    ClassOutOfRange(usize, usize),

    #[error("covariance for class {class} is not positive definite (after regularization {eps_reg})")]
    NotPositiveDefinite { class: usize, eps_reg: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("manifold-intrusion redraw cap exceeded ({attempts} attempts for batch of {batch_size})")]
    RedrawCapExceeded { attempts: usize, batch_size: usize },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
