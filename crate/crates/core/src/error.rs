use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("position {coord} on axis {axis} is outside the valid range [{lo}, {hi}]")]
    OutOfDomain {
        axis: usize,
        coord: f64,
        lo: f64,
        hi: f64,
    },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error(
        "operator is not positive semidefinite: curvature {curvature:e} along a search direction"
    )]
    Indefinite { curvature: f64 },

    #[error("empty fluid domain")]
    EmptyDomain,

    #[error("level set has no interface")]
    NoInterface,

    #[error("unknown scene '{name}' (available: {available})")]
    UnknownScene { name: String, available: String },

    #[error("{0}")]
    Validation(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("malformed frame file: {0}")]
    Frame(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("step {step}, stage '{stage}': {source}")]
    Stage {
        step: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_stage(self, step: usize, stage: &'static str) -> Self {
        Error::Stage {
            step,
            stage,
            source: Box::new(self),
        }
    }
}
