use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Evaluation outside the set where the quantity is defined (e.g. the
    /// gradient of a norm at the origin).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {message}{}", residual.map(|r| format!(" (residual {r:e})")).unwrap_or_default())]
    Numeric {
        message: String,
        residual: Option<f64>,
    },

    /// A structural hypothesis on the data is violated. `hypothesis` is the
    /// roman-numeral label, e.g. `"(iii)"`.
    #[error("hypothesis {hypothesis} violated: {detail}")]
    Admissibility { hypothesis: String, detail: String },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Box<Vec<f64>>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>, residual: Option<f64>) -> Self {
        Error::Numeric {
            message: msg.into(),
            residual,
        }
    }

    pub(crate) fn hypothesis(label: &str, detail: impl Into<String>) -> Self {
        Error::Admissibility {
            hypothesis: label.to_string(),
            detail: detail.into(),
        }
    }
}
