//! Benchmark instances, solution decoding and optimality gaps.

mod eval;
mod instance;
mod parse;

pub use eval::*;
pub use instance::*;
pub use parse::*;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("unsupported edge weight type {0} (only EUC_2D)")]
    UnsupportedEdgeWeight(String),
    #[error("no BKS registry entry for instance {0:?}")]
    MissingBks(String),
    #[error("BKS registry: {0}")]
    Registry(String),
    #[error("instance invariant violated: {0}")]
    Invariant(String),
    #[error("invalid encoding: {0}")]
    InvalidEncoding(String),
    #[error("solution domain {solution} does not match instance domain {instance}")]
    DomainMismatch { instance: Domain, solution: Domain },
    #[error("best-known value must be positive, got {0}")]
    NonPositiveBks(f64),
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("unknown instance format {0:?}")]
    UnknownFormat(String),
    #[error("{0}")]
    Io(String),
}
