use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller passed an argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A computation produced a non-finite value or a factorization failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Cholesky factorization failed even at the largest jitter on the ladder.
    #[error("kernel matrix of size {size} is not positive definite even with jitter {max_jitter:e}: {gram:?}")]
    NotPositiveDefinite {
        size: usize,
        max_jitter: f64,
        gram: Vec<f64>,
    },

    /// A sampler step failed; wraps the underlying cause with the iteration.
    #[error("sampler failed at iteration {iteration}: {source}")]
    Step {
        iteration: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that stem from configuration rather than runtime.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse(_))
    }
}
