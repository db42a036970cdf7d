use std::path::PathBuf;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value was outside its admissible domain.
    #[error("{name} = {value} is out of range: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// An argument or configuration was structurally invalid.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
    /// Not enough data was provided for the requested operation.
    #[error("not enough data: {0}")]
    NotEnoughData(String),
    /// Two containers that must agree in shape did not.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A row of an input file could not be parsed.
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    /// A multiplicative recursion would divide by a nonpositive state value.
    #[error("nonpositive divisor in {component} ({value})")]
    NonPositiveDivisor { component: &'static str, value: f64 },
    /// A design matrix column carried no information.
    #[error("degenerate design: column {column} ({name}) is constant")]
    DegenerateDesign { column: usize, name: String },
    /// Training produced a non-finite value.
    #[error("non-finite value during training at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: String },
    /// Forecast keys did not line up with the actuals or another run.
    #[error("key mismatch: {0}")]
    KeyMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        reason: reason.into(),
    }
}
