use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its domain (alpha, lambda, k, shapes, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Malformed in-memory input such as an empty dataset or bad group weights.
    #[error("invalid input: {0}")]
    Input(String),

    /// File ingestion failure; row numbers are 1-based data rows (header excluded).
    #[error("ingestion error{}{}: {message}", fmt_row(*.row), fmt_col(.column))]
    Ingestion {
        row: Option<usize>,
        column: Option<String>,
        message: String,
    },

    /// The optimizer produced a non-finite objective. `trace` holds the
    /// objective values recorded before the failure.
    #[error("numerical failure at epoch {epoch}: {message}")]
    Numerical {
        epoch: usize,
        message: String,
        trace: Vec<f64>,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("unsupported axiom: {0}")]
    UnsupportedAxiom(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_row(row: Option<usize>) -> String {
    row.map(|r| format!(" at row {r}")).unwrap_or_default()
}

fn fmt_col(col: &Option<String>) -> String {
    col.as_ref()
        .map(|c| format!(" in column '{c}'"))
        .unwrap_or_default()
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
