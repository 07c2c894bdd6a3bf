use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdlError {
    #[error("parameter `{field}` is not a finite number")]
    NonFinite { field: &'static str },

    #[error("constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("step probability a + theta*x leaves [0,1] on x in [0,1] (a={a}, theta={theta})")]
    ProbabilityEscape { a: f64, theta: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("oracle cap exceeded: n={n} > {cap}")]
    OracleCapExceeded { n: u64, cap: u64 },

    #[error("moment order {order} exceeds cap {cap}")]
    OrderCapExceeded { order: usize, cap: usize },

    #[error("tolerance {tol:e} could not be certified within {cap} terms")]
    ToleranceUnreachable { tol: f64, cap: u64 },

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("trajectory stride incompatible: {0}")]
    StrideIncompatible(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("summary and theory were built from different parameters")]
    ParamsMismatch,

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for OdlError {
    fn from(e: std::io::Error) -> Self {
        OdlError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for OdlError {
    fn from(e: serde_json::Error) -> Self {
        OdlError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, OdlError>;
