use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use sha2::{Digest, Sha256};

use super::EngineError;
use crate::problem::{Domain, ProblemInstance};
use crate::rng::SeedStream;

/// Pairs sampled by [`population_diversity`] once enumeration gets too large.
pub const DIVERSITY_SAMPLE_PAIRS: usize = 256;
/// Populations up to this size have every pair enumerated.
pub const DIVERSITY_EXACT_LIMIT: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub encoding: Vec<u32>,
    pub cost: f64,
}

impl Individual {
    pub fn evaluate(instance: &ProblemInstance, encoding: Vec<u32>) -> Self {
        let cost = instance.cost(&encoding);
        Self { encoding, cost }
    }
}

/// A population snapshot. Value semantics: stepping produces a new one.
#[derive(Clone, Debug)]
pub struct Population {
    pub instance: Arc<ProblemInstance>,
    pub members: Vec<Individual>,
    pub generation: u64,
    pub best_ever: Individual,
}

impl Population {
    /// Builds a population from explicit members, checking every encoding.
    pub fn from_members(
        instance: Arc<ProblemInstance>,
        members: Vec<Individual>,
        generation: u64,
    ) -> Result<Self, EngineError> {
        if members.len() < 2 {
            return Err(EngineError::TooFewMembers(members.len()));
        }
        for m in &members {
            instance.check_encoding(&m.encoding)?;
        }
        let best_ever = members[best_index(&members)].clone();
        Ok(Self {
            instance,
            members,
            generation,
            best_ever,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn domain(&self) -> Domain {
        self.instance.domain()
    }

    /// Current best member (lowest cost, earliest index on ties).
    pub fn best(&self) -> &Individual {
        &self.members[best_index(&self.members)]
    }

    pub fn mean_cost(&self) -> f64 {
        self.members.iter().map(|m| m.cost).sum::<f64>() / self.members.len() as f64
    }

    /// SHA-256 over generation, members and best-ever, in a fixed byte layout.
    pub fn snapshot_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.generation.to_le_bytes());
        h.update((self.members.len() as u64).to_le_bytes());
        for m in self.members.iter().chain(std::iter::once(&self.best_ever)) {
            h.update(m.cost.to_bits().to_le_bytes());
            for v in &m.encoding {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub(crate) fn best_index(members: &[Individual]) -> usize {
    let mut best = 0;
    for (i, m) in members.iter().enumerate() {
        if m.cost < members[best].cost {
            best = i;
        }
    }
    best
}

/// `n` uniformly random valid encodings at generation 0.
pub fn init_population(instance: Arc<ProblemInstance>, n: usize, stream: SeedStream) -> Result<Population, EngineError> {
    if n < 2 {
        return Err(EngineError::TooFewMembers(n));
    }
    let mut rng = stream.rng();
    let symbols = instance.symbols();
    let members = (0..n)
        .map(|_| {
            let mut enc = symbols.clone();
            enc.shuffle(&mut rng);
            Individual::evaluate(&instance, enc)
        })
        .collect::<Vec<_>>();
    let best_ever = members[best_index(&members)].clone();
    Ok(Population {
        instance,
        members,
        generation: 0,
        best_ever,
    })
}

/// `1 - matches / len` over positions.
pub fn positional_distance(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    1.0 - same as f64 / a.len() as f64
}

/// Mean pairwise positional distance, in [0, 1].
pub fn population_diversity(members: &[Individual], stream: SeedStream) -> f64 {
    let n = members.len();
    if n < 2 {
        return 0.0;
    }
    if n <= DIVERSITY_EXACT_LIMIT {
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                sum += positional_distance(&members[i].encoding, &members[j].encoding);
                pairs += 1;
            }
        }
        return sum / pairs as f64;
    }
    let mut rng = stream.rng();
    let mut sum = 0.0;
    for _ in 0..DIVERSITY_SAMPLE_PAIRS {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        sum += positional_distance(&members[i].encoding, &members[j].encoding);
    }
    sum / DIVERSITY_SAMPLE_PAIRS as f64
}
