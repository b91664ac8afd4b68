//! Independent reference implementations used as test oracles.
//!
//! Nothing here depends on `w2s-core`; every routine is written from the
//! textbook definition and favours obviousness over speed.

pub mod categorize;
pub mod forward;
pub mod gradient;
pub mod minimax;
pub mod stats;

/// A value paired with the name of the brute-force procedure that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    pub value: T,
    pub method: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    IllegalPosition(String),
    ZeroVariance,
    BadInput(String),
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleError::IllegalPosition(s) => write!(f, "illegal position {s}"),
            OracleError::ZeroVariance => f.write_str("differences have zero variance"),
            OracleError::BadInput(s) => write!(f, "bad input: {s}"),
        }
    }
}

impl std::error::Error for OracleError {}
