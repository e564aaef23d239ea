use thiserror::Error;

/// Errors raised by grid construction, the solvers and the CLI layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("target volume {requested} is out of range: the problem is only posed for v > {lower}")]
    VolumeOutOfRange { requested: f64, lower: f64 },

    #[error("volume {requested} not bracketed by the level sets; increase the truncation radius")]
    TruncationRadius { requested: f64 },

    #[error("closest level set has volume {achieved}, target {requested} (tolerance {tol}); refine the grid")]
    VolumeNotResolved {
        requested: f64,
        achieved: f64,
        tol: f64,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
