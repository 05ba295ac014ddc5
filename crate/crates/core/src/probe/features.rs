use serde::{Deserialize, Serialize};

use super::ProbeError;
use crate::engine::{GenerationRecord, GenerationTrace, Population};
use crate::problem::{optimality_gap, ProblemInstance};

/// Kinematics and operator telemetry of a trajectory window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFeatures {
    /// Mean per-generation decrease of the best gap (percent/gen); positive is progress.
    pub velocity: f64,
    /// Mean second difference of the best gap (percent/gen^2).
    pub acceleration: f64,
    pub diversity: f64,
    pub diversity_loss_rate: f64,
    pub operator_precision: f64,
    /// Mean gain of improving offspring, in percent of the BKS.
    pub operator_impact: f64,
    pub stagnation_len: f64,
}

impl TrajectoryFeatures {
    pub const FIELDS: [&'static str; 7] = [
        "velocity",
        "acceleration",
        "diversity",
        "diversity_loss_rate",
        "operator_precision",
        "operator_impact",
        "stagnation_len",
    ];

    pub fn values(&self) -> [f64; 7] {
        [
            self.velocity,
            self.acceleration,
            self.diversity,
            self.diversity_loss_rate,
            self.operator_precision,
            self.operator_impact,
            self.stagnation_len,
        ]
    }

    fn from_values(v: [f64; 7]) -> Self {
        Self {
            velocity: v[0],
            acceleration: v[1],
            diversity: v[2],
            diversity_loss_rate: v[3],
            operator_precision: v[4],
            operator_impact: v[5],
            stagnation_len: v[6],
        }
    }

    /// Field-wise arithmetic mean.
    pub fn mean(items: &[TrajectoryFeatures]) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let mut acc = [0.0; 7];
        for f in items {
            for (a, v) in acc.iter_mut().zip(f.values()) {
                *a += v;
            }
        }
        Some(Self::from_values(acc.map(|a| a / items.len() as f64)))
    }

    /// `name: value` lines in fixed order with four decimals.
    pub fn render(&self) -> String {
        Self::FIELDS
            .iter()
            .zip(self.values())
            .map(|(k, v)| format!("{k}: {v:.4}\n"))
            .collect()
    }
}

/// A record describing a population before any step of a window.
pub fn origin_record(pop: &Population, diversity: f64) -> GenerationRecord {
    GenerationRecord {
        generation: pop.generation,
        best_cost: pop.best().cost,
        mean_cost: pop.mean_cost(),
        diversity,
        successes: 0,
        offspring: 0,
        total_gain: 0.0,
    }
}

/// Distills a trace of at least three records into features.
pub fn extract_features(trace: &GenerationTrace, instance: &ProblemInstance) -> Result<TrajectoryFeatures, ProbeError> {
    let recs = &trace.records;
    if recs.len() < 3 {
        return Err(ProbeError::TraceTooShort(recs.len()));
    }
    let bks = instance.bks().value;
    let gaps = recs
        .iter()
        .map(|r| optimality_gap(r.best_cost, bks))
        .collect::<Result<Vec<_>, _>>()?;
    let n = recs.len();

    let velocity = (1..n).map(|t| -(gaps[t] - gaps[t - 1])).sum::<f64>() / (n - 1) as f64;
    let acceleration = (2..n)
        .map(|t| (gaps[t] - gaps[t - 1]) - (gaps[t - 1] - gaps[t - 2]))
        .sum::<f64>()
        / (n - 2) as f64;
    let diversity_loss_rate = (1..n)
        .map(|t| -(recs[t].diversity - recs[t - 1].diversity))
        .sum::<f64>()
        / (n - 1) as f64;

    let successes: u64 = recs.iter().map(|r| r.successes).sum();
    let offspring: u64 = recs.iter().map(|r| r.offspring).sum();
    let gain: f64 = recs.iter().map(|r| r.total_gain).sum();
    let operator_precision = if offspring == 0 {
        0.0
    } else {
        successes as f64 / offspring as f64
    };
    let operator_impact = if successes == 0 {
        0.0
    } else {
        100.0 * gain / (successes as f64 * bks)
    };

    let last_improvement = (1..n).rev().find(|&t| recs[t].best_cost < recs[t - 1].best_cost).unwrap_or(0);

    Ok(TrajectoryFeatures {
        velocity,
        acceleration,
        diversity: recs[n - 1].diversity,
        diversity_loss_rate,
        operator_precision,
        operator_impact,
        stagnation_len: (n - 1 - last_improvement) as f64,
    })
}
