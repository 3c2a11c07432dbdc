use thiserror::Error;

/// Errors raised by the estimators, solvers and loaders in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("duplicate date `{0}`")]
    DuplicateDate(String),
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("empty intersection of dates across panels")]
    EmptyIntersection,
    #[error("invalid prudence level {0}: must lie strictly between 0 and 1")]
    InvalidPrudence(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degenerate tail: {count} observation(s) strictly below the cutoff, at least 2 required")]
    DegenerateTail { count: usize },
    #[error("degenerate marginal: zero rank covariance in the denominator")]
    DegenerateMarginal,
    #[error("pair ({row}, {column}): {source}")]
    Pair {
        row: String,
        column: String,
        #[source]
        source: Box<Error>,
    },
    #[error("insufficient exceedances: {count} found, at least {required} required")]
    InsufficientExceedances { count: usize, required: usize },
    #[error("GPD support violated: 1 + shape * y / scale <= 0")]
    SupportViolation,
    #[error("GPD fit did not converge: best shape {shape}, scale {scale}, loglik {loglik}")]
    NonConvergence { shape: f64, scale: f64, loglik: f64 },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("ill-conditioned risk matrix (condition number {0:e})")]
    IllConditioned(f64),
    #[error("degenerate frontier: expected returns are collinear with the budget vector")]
    DegenerateFrontier,
    #[error("degenerate means: all expected returns are equal")]
    DegenerateMeans,
    #[error("infeasible target {target}: {reason}")]
    Infeasible { target: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn pair(row: &str, column: &str, source: Error) -> Self {
        Error::Pair {
            row: row.to_string(),
            column: column.to_string(),
            source: Box::new(source),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
