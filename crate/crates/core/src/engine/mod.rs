//! The solution-level dynamic system: populations, one-generation steps and horizons.

mod population;
mod trace;

pub use population::*;
pub use trace::*;

use std::time::Instant;

use thiserror::Error;

use crate::dsl::{apply_operator, InterpError, OperatorSpec};
use crate::problem::ProblemError;
use crate::rng::SeedStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("population needs at least 2 members, got {0}")]
    TooFewMembers(usize),
    #[error("horizon must be at least 1 generation")]
    EmptyHorizon,
    #[error("trace is empty")]
    EmptyTrace,
    #[error("wall-clock limit reached after generation {0}")]
    Timeout(u64),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// One generation: variation by `spec`, then (mu + lambda) truncation.
///
/// Survivors are the `N` best of parents followed by offspring, sorted stably
/// by cost, so ties favour parents and earlier offspring.
pub fn step(pop: &Population, spec: &OperatorSpec, stream: SeedStream) -> Result<(Population, GenerationRecord), EngineError> {
    let n = pop.len();
    let offspring = apply_operator(spec, pop, stream.derive_named("variation"))?;

    let mut successes = 0u64;
    let mut total_gain = 0.0;
    for o in &offspring {
        let parent_best = pop.members[o.parents[0]].cost.min(pop.members[o.parents[1]].cost);
        if o.cost < parent_best {
            successes += 1;
            total_gain += parent_best - o.cost;
        }
    }

    let offspring_count = offspring.len() as u64;
    let mut pool: Vec<Individual> = pop.members.clone();
    pool.extend(offspring.into_iter().map(|o| Individual {
        encoding: o.encoding,
        cost: o.cost,
    }));
    pool.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    pool.truncate(n);

    let mut next = Population {
        instance: pop.instance.clone(),
        members: pool,
        generation: pop.generation + 1,
        best_ever: pop.best_ever.clone(),
    };
    if next.members[0].cost < next.best_ever.cost {
        next.best_ever = next.members[0].clone();
    }
    let record = GenerationRecord {
        generation: next.generation,
        best_cost: next.members[0].cost,
        mean_cost: next.mean_cost(),
        diversity: population_diversity(&next.members, stream.derive_named("diversity")),
        successes,
        offspring: offspring_count,
        total_gain,
    };
    Ok((next, record))
}

/// `h` consecutive steps. Generation `g` draws from `stream.derive(g)`, so two
/// horizons of 5 compose into one horizon of 10.
pub fn run_horizon(
    pop: &Population,
    spec: &OperatorSpec,
    h: usize,
    stream: SeedStream,
) -> Result<(Population, GenerationTrace), EngineError> {
    run_horizon_until(pop, spec, h, stream, None)
}

/// [`run_horizon`] that gives up once `deadline` has passed.
pub fn run_horizon_until(
    pop: &Population,
    spec: &OperatorSpec,
    h: usize,
    stream: SeedStream,
    deadline: Option<Instant>,
) -> Result<(Population, GenerationTrace), EngineError> {
    if h == 0 {
        return Err(EngineError::EmptyHorizon);
    }
    let mut trace = GenerationTrace::default();
    let mut cur = pop.clone();
    for _ in 0..h {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(EngineError::Timeout(cur.generation));
        }
        let (next, rec) = step(&cur, spec, stream.derive(cur.generation))?;
        trace.records.push(rec);
        cur = next;
    }
    Ok((cur, trace))
}
