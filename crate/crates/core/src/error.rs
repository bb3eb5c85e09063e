use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid penalty specification: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("{day} hour {hour}: {source}")]
    AtForecast {
        day: NaiveDate,
        hour: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at(self, day: NaiveDate, hour: usize) -> Self {
        Error::AtForecast {
            day,
            hour,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping `(day, hour)` annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtForecast { source, .. } => source.root(),
            other => other,
        }
    }

    /// Which pipeline stage an error belongs to, used for exit-code mapping.
    pub fn kind(&self) -> ErrorKind {
        match self.root() {
            Error::Config(_) | Error::InvalidSpec(_) => ErrorKind::Config,
            Error::Numeric(_) | Error::DegenerateSample(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}
