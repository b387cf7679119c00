use std::io;

/// Errors produced by the workbench library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid body parameters: `{field}` is not finite")]
    NonFiniteParam { field: String },
    #[error("invalid camera scale {0}: must be positive")]
    NonPositiveScale(f64),
    #[error("expected {expected} values, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("invalid mesh template: {0}")]
    Template(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("insufficient data: {0}")]
    Data(String),
    #[error("finite-difference step {0} outside [1e-7, 1e-3]")]
    StepSize(f64),
    #[error("finite differences need a scalar output, got {0} values")]
    NonScalar(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
