use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of a behavioural function.
    #[error("{function}: argument {value} outside domain ({constraint})")]
    Domain {
        function: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("singular state: {0}")]
    SingularState(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("no interior equilibrium: {0}")]
    NoInteriorEquilibrium(String),

    #[error("degenerate equilibrium: alpha + beta + i(omega) = {0} <= 0")]
    DegenerateEquilibrium(f64),

    #[error("government debt ratio undefined: denominator i(omega) + alpha + beta - r_g = {0}")]
    GovDebtUndefined(f64),

    #[error("unknown scenario preset `{name}` (available: {available})")]
    UnknownPreset { name: String, available: String },

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("insufficient data: {found} complete observations, need at least {required}")]
    InsufficientData { found: usize, required: usize },

    #[error("malformed input {context}: {message}")]
    Malformed { context: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Malformed {
            context: context.into(),
            message: message.into(),
        }
    }
}
