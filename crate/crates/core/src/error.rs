use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("malformed expression: {0}")]
    Malformed(String),

    #[error("base-space mismatch: expected {expected}, found {found}")]
    SpaceMismatch { expected: String, found: String },

    #[error("injectivity violation: {first} and {second} both map to {image}")]
    Injectivity { first: u64, second: u64, image: u64 },

    #[error("map is not increasing at {at}")]
    NotIncreasing { at: u64 },

    #[error("effort exceeded: {0}")]
    EffortExceeded(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("annotation inconsistent with window statistics: {0}")]
    Annotation(String),

    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),

    #[error("nonpositive series term at index {0}")]
    NonPositiveTerm(u64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl Error {
    pub fn is_effort(&self) -> bool {
        matches!(self, Error::EffortExceeded(_))
    }
}
