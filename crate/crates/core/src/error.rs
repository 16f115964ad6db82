use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// The weighted evaluation matrix lost rank; `column` is the basis index
    /// (in the basis' own ordering) at which the deficiency was detected.
    #[error("degenerate support: basis column {column} is not resolved by the support")]
    DegenerateSupport { column: usize },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("resolution error: mesh too coarse (mass defect {mass_defect:.3e})")]
    Resolution { mass_defect: f64 },

    #[error("degenerate map: resultant vanishes")]
    DegenerateMap,

    #[error("iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    Iteration { iterations: usize, residual: f64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
