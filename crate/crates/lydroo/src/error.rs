use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An allocation violated a hard constraint. This signals a solver bug,
    /// not a valid runtime state.
    #[error("infeasible allocation: {0}")]
    Infeasible(String),

    #[error("data causality violated at WD {wd}: processed {processed} exceeds queue {queued}")]
    Causality {
        wd: usize,
        processed: f64,
        queued: f64,
    },

    #[error("config parse error (line {line}): {reason}")]
    ConfigParse { line: usize, reason: String },

    #[error("csv parse error (line {line}): {reason}")]
    CsvParse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
