//! Run orchestration: configuration, the event trace and the budget ledger.

mod config;
mod run;
mod trace;

pub use config::*;
pub use run::*;
pub use trace::*;

use thiserror::Error;

use crate::engine::EngineError;
use crate::meta::{BackendError, MetaError};
use crate::probe::ProbeError;
use crate::problem::ProblemError;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("config: {0}")]
    Config(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error("trace schema version {found} is not supported (expected {expected})")]
    Schema { found: String, expected: u32 },
    #[error("budget exceeded: {total} units spent of {budget}")]
    OverBudget { total: u64, budget: u64 },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}
