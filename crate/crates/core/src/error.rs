use thiserror::Error;

/// Errors raised while validating inputs or pricing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model, contract or configuration field violates its invariant.
    #[error("{field} {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// An argument of a closed-form routine is outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model/contract combination has no pricing route.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A CSV file could not be written or parsed.
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// Name of the offending field, for validation errors.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            Error::InvalidParameter { field, .. } => Some(field),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
