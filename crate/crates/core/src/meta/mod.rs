//! The upper-level policy: evolves the algorithm population through a
//! diagnosis stage and a coding stage against a pluggable back end.

mod backend;
mod pipeline;
mod population;
pub mod prompts;
mod scripted;

pub use backend::*;
pub use pipeline::*;
pub use population::*;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetaError {
    #[error("algorithm population is empty")]
    EmptyPopulation,
    #[error("combine needs at least two specs")]
    CombineNeedsTwo,
    #[error("diagnosis reply lacked <analysis>/<direction> after {0} attempts")]
    DiagnosisFailed(usize),
    #[error("synthesis failed after {attempts} attempts: {}", violations.join("; "))]
    SynthesisFailed { attempts: usize, violations: Vec<String> },
    #[error(transparent)]
    Backend(#[from] BackendError),
}
