use thiserror::Error;

/// Errors raised by the detection, simulation and calibration routines.
#[derive(Debug, Error)]
pub enum CpdError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A moment point left the admissible region of the model (for example a
    /// segment whose empirical variance collapsed to zero).
    #[error("degenerate moment point: {0}")]
    DegenerateMoment(String),

    /// No admissible split survived; the series carries no usable statistic.
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, CpdError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CpdError {
    CpdError::InvalidInput(msg.into())
}
