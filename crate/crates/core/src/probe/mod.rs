//! Look-ahead rollouts from a shared snapshot, scoring and feature extraction.

mod features;

pub use features::*;

pub use crate::engine::population_diversity;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{OperatorSpec, SpecId};
use crate::engine::{run_horizon_until, EngineError, GenerationTrace, Population};
use crate::problem::{optimality_gap, ProblemError};
use crate::rng::SeedStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("no candidates to probe")]
    NoCandidates,
    #[error("probe horizon must be at least 2 generations, got {0}")]
    HorizonTooShort(usize),
    #[error("at least one rollout per candidate is required")]
    NoRollouts,
    #[error("cannot score an empty gap list")]
    EmptyScores,
    #[error("feature extraction needs at least 3 records, got {0}")]
    TraceTooShort(usize),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub spec_id: SpecId,
    pub status: CandidateStatus,
    /// Mean final gap; absent when the candidate failed.
    pub score: Option<f64>,
    pub gaps: Vec<f64>,
    pub features: Option<TrajectoryFeatures>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CandidateReport {
    /// Score with failures mapped to +infinity, for ordering.
    pub fn rank_score(&self) -> f64 {
        self.score.unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    /// SHA-256 of the population every candidate started from.
    pub snapshot_hash: String,
    pub generation: u64,
    pub t_probe: usize,
    pub rollouts: usize,
    pub candidates: Vec<CandidateReport>,
    /// Features of the incumbent's most recent real-trajectory window.
    pub anchor_real: Option<TrajectoryFeatures>,
}

impl RolloutReport {
    pub fn get(&self, id: SpecId) -> Option<&CandidateReport> {
        self.candidates.iter().find(|c| c.spec_id == id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeSettings {
    pub t_probe: usize,
    pub rollouts: usize,
    /// Wall-clock limit per rollout; a rollout that exceeds it fails.
    pub time_limit: Option<Duration>,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            t_probe: 30,
            rollouts: 3,
            time_limit: None,
        }
    }
}

/// Arithmetic mean of per-rollout final gaps.
pub fn score(gaps: &[f64]) -> Result<f64, ProbeError> {
    if gaps.is_empty() {
        return Err(ProbeError::EmptyScores);
    }
    Ok(gaps.iter().sum::<f64>() / gaps.len() as f64)
}

/// Stream of rollout `r`. Every candidate in a probe uses the same schedule.
pub fn rollout_stream(probe_stream: SeedStream, r: usize) -> SeedStream {
    probe_stream.derive(r as u64)
}

struct Rollout {
    gap: f64,
    features: TrajectoryFeatures,
}

fn one_rollout(
    pop: &Population,
    spec: &OperatorSpec,
    settings: &ProbeSettings,
    stream: SeedStream,
    origin_diversity: f64,
) -> Result<Rollout, String> {
    let deadline = settings.time_limit.map(|d| Instant::now() + d);
    let (end, trace) =
        run_horizon_until(pop, spec, settings.t_probe, stream, deadline).map_err(|e: EngineError| e.to_string())?;
    let gap = optimality_gap(end.best().cost, pop.instance.bks().value).map_err(|e| e.to_string())?;
    let mut window = GenerationTrace {
        records: vec![origin_record(pop, origin_diversity)],
    };
    window.extend(trace);
    let features = extract_features(&window, &pop.instance).map_err(|e| e.to_string())?;
    Ok(Rollout { gap, features })
}

/// Runs `settings.rollouts` rollouts of `settings.t_probe` generations for each
/// candidate, all from a clone of `pop`.
pub fn probe(
    pop: &Population,
    candidates: &[OperatorSpec],
    settings: &ProbeSettings,
    stream: SeedStream,
) -> Result<RolloutReport, ProbeError> {
    if candidates.is_empty() {
        return Err(ProbeError::NoCandidates);
    }
    if settings.t_probe < 2 {
        return Err(ProbeError::HorizonTooShort(settings.t_probe));
    }
    if settings.rollouts == 0 {
        return Err(ProbeError::NoRollouts);
    }
    let snapshot_hash = pop.snapshot_hash();
    let origin_diversity = population_diversity(&pop.members, stream.derive_named("origin"));
    let m = settings.rollouts;

    let results: Vec<Result<Rollout, String>> = (0..candidates.len() * m)
        .into_par_iter()
        .map(|k| {
            let (c, r) = (k / m, k % m);
            one_rollout(pop, &candidates[c], settings, rollout_stream(stream, r), origin_diversity)
        })
        .collect();

    let mut reports = Vec::with_capacity(candidates.len());
    for (c, spec) in candidates.iter().enumerate() {
        let chunk = &results[c * m..(c + 1) * m];
        let report = match chunk.iter().find_map(|r| r.as_ref().err()) {
            Some(err) => CandidateReport {
                spec_id: spec.id,
                status: CandidateStatus::Failed,
                score: None,
                gaps: Vec::new(),
                features: None,
                error: Some(err.clone()),
            },
            None => {
                let ok: Vec<&Rollout> = chunk.iter().map(|r| r.as_ref().expect("checked")).collect();
                let gaps: Vec<f64> = ok.iter().map(|r| r.gap).collect();
                let feats: Vec<TrajectoryFeatures> = ok.iter().map(|r| r.features).collect();
                CandidateReport {
                    spec_id: spec.id,
                    status: CandidateStatus::Ok,
                    score: Some(score(&gaps)?),
                    gaps,
                    features: TrajectoryFeatures::mean(&feats),
                    error: None,
                }
            }
        };
        reports.push(report);
    }
    Ok(RolloutReport {
        snapshot_hash,
        generation: pop.generation,
        t_probe: settings.t_probe,
        rollouts: m,
        candidates: reports,
        anchor_real: None,
    })
}
