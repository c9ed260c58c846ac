use std::path::PathBuf;

/// Errors produced by the simulator and its tooling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("fewer than two rising zero crossings in the analysis window")]
    InsufficientCrossings,

    #[error("signal never settles within the requested band")]
    NeverSettles,

    #[error("numerical blow-up in {what} at t = {time:.6} s")]
    NumericalBlowup { what: &'static str, time: f64 },

    #[error("joint control set of 8^{vsis} candidates exceeds the enumeration limit")]
    ControlSetTooLarge { vsis: usize },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::ConfigInvalid(msg.into())
    }
}
