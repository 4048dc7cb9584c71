use thiserror::Error;

/// Errors raised by the attribution library.
///
/// The variants map one-to-one onto the error classes reported by the command
/// line front end.
#[derive(Debug, Error)]
pub enum EsvError {
    /// Malformed input: bad shapes, out-of-range indices, non-finite values.
    #[error("{path}: {message}")]
    Validation { path: String, message: String },

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The request exceeds a configured size limit.
    #[error("{what} = {requested} exceeds the limit of {limit}")]
    Capacity {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    /// A metric is undefined for the supplied vectors (zero variance, all-zero attribution).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl EsvError {
    pub fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        EsvError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        EsvError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            EsvError::Validation { .. } => "validation",
            EsvError::Contract(_) => "validation",
            EsvError::Capacity { .. } => "capacity",
            EsvError::UndefinedMetric(_) => "undefined-metric",
            EsvError::Io { .. } => "io",
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            EsvError::Validation { .. } | EsvError::Contract(_) => 2,
            EsvError::Capacity { .. } => 3,
            EsvError::UndefinedMetric(_) => 4,
            EsvError::Io { .. } => 5,
        }
    }
}

pub type Result<T, E = EsvError> = std::result::Result<T, E>;
