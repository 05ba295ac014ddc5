//! Receding-horizon co-evolution of search operators and solution populations.

pub mod cli;
pub mod control;
pub mod dsl;
pub mod engine;
pub mod meta;
pub mod probe;
pub mod problem;
pub mod rng;
