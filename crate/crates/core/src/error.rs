use thiserror::Error;

/// Error payload shared by every module. The CLI maps each variant to an exit code.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error at {location}: {detail}")]
    Domain { location: String, detail: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("smoothness horizon exceeded: {detail} (largest admissible T1 ~ {max_t1:.6})")]
    Horizon { detail: String, max_t1: f64 },
    #[error("weight violates positivity by {violation:.3e}; use a larger gamma")]
    Weight { violation: f64 },
    #[error("did not converge: {0}")]
    NonConvergence(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(location: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Domain {
            location: location.into(),
            detail: detail.into(),
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Shape(_)
            | Error::Domain { .. }
            | Error::Precondition(_)
            | Error::Horizon { .. }
            | Error::Weight { .. } => 3,
            Error::NonConvergence(_) => 4,
            Error::Internal(_) => 5,
        }
    }
}
