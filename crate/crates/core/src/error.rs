use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{0}` has fewer than two distinct non-missing values")]
    DegenerateVariable(String),

    #[error("2x2 table has a zero margin; the test is undefined")]
    ZeroMargin,

    #[error("labels contain a single class")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("failed to converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },

    #[error("perplexity search failed to converge for point {index}")]
    PerplexitySearch { index: usize },

    #[error("not enough controls: {cases} cases but {controls} controls")]
    InsufficientControls { cases: usize, controls: usize },

    #[error("prevalence {target} is infeasible; achievable range is [{low}, {high}]")]
    InfeasiblePrevalence { target: f64, low: f64, high: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Stage { source, .. } => source.class(),
            Error::Config(_) | Error::Schema(_) | Error::InvalidArgument(_) => ErrorClass::Config,
            Error::NonConvergence { .. }
            | Error::PerplexitySearch { .. }
            | Error::Numerical(_)
            | Error::InfeasiblePrevalence { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}
