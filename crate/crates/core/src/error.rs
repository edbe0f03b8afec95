use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed hierarchy: {0}")]
    Hierarchy(String),
    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short stable name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non-finite",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Parse { .. } => "parse",
            Error::Hierarchy(_) => "hierarchy",
            Error::Numerical { .. } => "numerical",
            Error::Config(_) => "config",
            Error::MissingInput(_) => "missing-input",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
