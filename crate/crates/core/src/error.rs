use thiserror::Error;

use crate::field::Elem;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("element code {code} is out of range for a field of order {order}")]
    InvalidElement { code: u64, order: u32 },

    #[error("invalid function table: {0}")]
    InvalidTable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{0}")]
    Parse(String),

    /// The requested brute-force computation is larger than the configured budget.
    #[error("compute budget exceeded: {what} needs about 2^{log2_cost:.1} operations (limit 2^{limit_log2}); pass --force to override")]
    BudgetExceeded {
        what: String,
        log2_cost: f64,
        limit_log2: u32,
    },

    #[error("degenerate transposition ({0}, {0}): alpha and beta must differ")]
    DegenerateTransposition(Elem),

    #[error("failed to build worker pool: {0}")]
    Pool(String),

    #[error("export failed: {0}")]
    Export(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Export(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Export(e.to_string())
    }
}
