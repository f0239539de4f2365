use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into two families: input/precondition failures (the caller
/// handed us something that does not satisfy a contract) and numeric failures
/// (the inputs were fine but a solver did not deliver).
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("operator is not positive semidefinite: minimum eigenvalue {min_eigenvalue:e} below tolerance {tolerance:e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("dissipation condition violated: atom {atom} has minimum eigenvalue {min_eigenvalue:e}")]
    Dissipation { atom: usize, min_eigenvalue: f64 },

    #[error("unbounded coupling unsupported: instantaneous friction term must be zero (norm {norm:e})")]
    UnboundedCoupling { norm: f64 },

    #[error("problem size {requested} exceeds budget {budget}")]
    Size { requested: usize, budget: usize },

    #[error("numeric failure in {routine}: {detail}")]
    Numeric { routine: &'static str, detail: String },

    #[error("fit failure: {0}")]
    Fit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than solver breakdown.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numeric { .. } | Error::Fit(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
