use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} lies outside the oracle domain [{lo}, {hi}]")]
    Domain { value: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("column `{column}` is degenerate (max == min)")]
    DegenerateColumn { column: &'static str },

    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadratureFailure),

    #[error("oracle slope {slope:e} at c = {at} is below the singularity threshold")]
    SingularSlope { at: f64, slope: f64 },

    #[error("noise resampling exceeded {attempts} attempts for sample {index}")]
    ResampleExhausted { index: usize, attempts: usize },

    #[error("ill-conditioned linear system: {0}")]
    IllConditioned(String),

    #[error("model is not invertible: {0}")]
    NotInvertible(String),

    #[error("{}:{line}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no metadata row for pair `{0}`")]
    MissingMetadata(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Why an adaptive integration stopped before reaching its tolerance.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureFailure {
    #[error("node budget of {budget} exhausted with error estimate {error:e}")]
    Budget { budget: usize, error: f64 },
    #[error("integrand returned a non-finite value at x = {at}")]
    NonFinite { at: f64 },
}
