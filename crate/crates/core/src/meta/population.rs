use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MetaError;
use crate::dsl::{tree_edit_distance, OperatorSpec, ReasoningMode, SpecId};
use crate::probe::TrajectoryFeatures;
use crate::rng::SeedStream;

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmEntry {
    pub spec: OperatorSpec,
    /// Latest probe score; `None` before the first probe or after a failure.
    pub score: Option<f64>,
    pub features: Option<TrajectoryFeatures>,
    /// Meta-generation the spec entered the population. Lower is older.
    pub born: u64,
}

impl AlgorithmEntry {
    pub fn rank_score(&self) -> f64 {
        self.score.unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmPopulation {
    pub entries: Vec<AlgorithmEntry>,
    pub generation: u64,
    next_id: u64,
}

impl AlgorithmPopulation {
    /// Assigns fresh ids `S1..` to the given specs.
    pub fn new(specs: Vec<OperatorSpec>) -> Self {
        let mut pop = Self {
            entries: Vec::new(),
            generation: 0,
            next_id: 1,
        };
        for mut spec in specs {
            spec.id = pop.mint_id();
            pop.entries.push(AlgorithmEntry {
                spec,
                score: None,
                features: None,
                born: 0,
            });
        }
        pop
    }

    pub fn mint_id(&mut self) -> SpecId {
        let id = SpecId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn specs(&self) -> Vec<OperatorSpec> {
        self.entries.iter().map(|e| e.spec.clone()).collect()
    }

    pub fn get(&self, id: SpecId) -> Option<&AlgorithmEntry> {
        self.entries.iter().find(|e| e.spec.id == id)
    }

    /// Orders by score, then age (older first), then id.
    fn survival_order(a: &AlgorithmEntry, b: &AlgorithmEntry) -> std::cmp::Ordering {
        a.rank_score()
            .total_cmp(&b.rank_score())
            .then(a.born.cmp(&b.born))
            .then(a.spec.id.cmp(&b.spec.id))
    }

    /// The entry the control loop applies.
    pub fn best(&self) -> Option<&AlgorithmEntry> {
        self.entries.iter().min_by(|a, b| Self::survival_order(a, b))
    }

    /// Keeps the `capacity` best entries, ordered best first.
    pub fn truncate(&mut self, capacity: usize) {
        self.entries.sort_by(Self::survival_order);
        self.entries.truncate(capacity);
    }
}

/// Sampling weights of the three reasoning modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeWeights {
    pub combine: f64,
    pub mutate: f64,
    pub explore: f64,
}

impl Default for ModeWeights {
    fn default() -> Self {
        Self {
            combine: 0.4,
            mutate: 0.4,
            explore: 0.2,
        }
    }
}

/// Draws a mode. Combine is excluded while fewer than two specs exist.
pub fn choose_mode(weights: &ModeWeights, population_size: usize, stream: SeedStream) -> ReasoningMode {
    let combine = if population_size < 2 { 0.0 } else { weights.combine.max(0.0) };
    let w = [combine, weights.mutate.max(0.0), weights.explore.max(0.0)];
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return ReasoningMode::Mutate;
    }
    let u = stream.rng().random::<f64>() * total;
    let mut acc = 0.0;
    for (mode, wi) in ReasoningMode::ALL.into_iter().zip(w) {
        acc += wi;
        if u < acc {
            return mode;
        }
    }
    // Rounding at the top end: last mode with positive weight.
    ReasoningMode::ALL
        .into_iter()
        .zip(w)
        .rev()
        .find(|(_, wi)| *wi > 0.0)
        .map(|(m, _)| m)
        .expect("positive total")
}

fn by_score_then_id(a: &AlgorithmEntry, b: &AlgorithmEntry) -> std::cmp::Ordering {
    a.rank_score().total_cmp(&b.rank_score()).then(a.spec.id.cmp(&b.spec.id))
}

/// Parent indices into `pop.entries`: two for combine, one otherwise.
pub fn select_parents(pop: &AlgorithmPopulation, mode: ReasoningMode, stream: SeedStream) -> Result<Vec<usize>, MetaError> {
    let n = pop.len();
    if n == 0 {
        return Err(MetaError::EmptyPopulation);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| by_score_then_id(&pop.entries[a], &pop.entries[b]));

    match mode {
        ReasoningMode::Combine => {
            if n < 2 {
                return Err(MetaError::CombineNeedsTwo);
            }
            let primary = order[0];
            let graph = &pop.entries[primary].spec.graph;
            let secondary = order[1..]
                .iter()
                .copied()
                .map(|i| (tree_edit_distance(graph, &pop.entries[i].spec.graph), i))
                // `order` is already by score then id, so the first maximum wins ties.
                .fold(None::<(usize, usize)>, |best, (d, i)| match best {
                    Some((bd, _)) if bd >= d => best,
                    _ => Some((d, i)),
                })
                .map(|(_, i)| i)
                .expect("at least one other entry");
            Ok(vec![primary, secondary])
        }
        ReasoningMode::Mutate | ReasoningMode::Explore => {
            // Weight 1/rank over the score ranking.
            let total: f64 = (1..=n).map(|r| 1.0 / r as f64).sum();
            let u = stream.rng().random::<f64>() * total;
            let mut acc = 0.0;
            for (r, &i) in order.iter().enumerate() {
                acc += 1.0 / (r + 1) as f64;
                if u < acc {
                    return Ok(vec![i]);
                }
            }
            Ok(vec![order[n - 1]])
        }
    }
}
