use alloc::string::String;

/// Errors raised by the core algorithms.
///
/// Every variant corresponds to a violated precondition or a degenerate input;
/// none of them are transient.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("projection at infinity (|w| = {0:e})")]
    ProjectionAtInfinity(f64),
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("empty support: mask has no pixels")]
    EmptySupport,
    #[error("arity: {0}")]
    Arity(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("empty field: no pixels left to segment")]
    EmptyField,
    #[error("non-finite loss in window {index} (center {center_time_s} s)")]
    NonFiniteLoss { index: usize, center_time_s: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
