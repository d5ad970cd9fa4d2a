use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    /// Cholesky broke down; `pivot` is 1-based.
    #[error("{what} is not symmetric positive definite (pivot {pivot} failed)")]
    NotSpd { what: String, pivot: usize },

    #[error("invalid field `{field}`: {reason}")]
    Field { field: String, reason: String },

    #[error("quadrature precision insufficient: error estimate {estimate:.3e} exceeds {limit:.3e}; increase panels")]
    Precision { estimate: f64, limit: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    /// A positivity guaranteed by theory failed numerically. Signals an
    /// invalid certificate or insufficient quadrature.
    #[error("positivity violation: {0}")]
    PositivityViolation(String),

    #[error("feedback does not stabilize at rate {rate}: measured spectral abscissa {abscissa}")]
    NotStabilizedAtRate { rate: f64, abscissa: f64 },

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Precision { .. }
                | Error::Singular(_)
                | Error::PositivityViolation(_)
                | Error::Convergence(_)
        )
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn field(field: &str, reason: impl Into<String>) -> Self {
        Error::Field {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
