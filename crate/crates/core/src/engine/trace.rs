use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::problem::{optimality_gap, ProblemInstance};

/// Statistics of one generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    /// Generation index after the step.
    pub generation: u64,
    pub best_cost: f64,
    pub mean_cost: f64,
    pub diversity: f64,
    /// Offspring strictly better than their best parent.
    pub successes: u64,
    /// Not exported to CSV; equals the population size.
    pub offspring: u64,
    /// Sum over successes of (best parent cost - child cost).
    pub total_gain: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub records: Vec<GenerationRecord>,
}

pub const CSV_HEADER: [&str; 6] = ["generation", "best_cost", "mean_cost", "diversity", "successes", "total_gain"];

#[derive(Serialize, Deserialize)]
struct CsvRow {
    generation: u64,
    best_cost: f64,
    mean_cost: f64,
    diversity: f64,
    successes: u64,
    total_gain: f64,
}

impl GenerationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn extend(&mut self, other: GenerationTrace) {
        self.records.extend(other.records);
    }

    pub fn best_costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.best_cost)
    }

    /// Writes the six CSV columns. Floats use the shortest round-trip form.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EngineError> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.records {
            wr.serialize(CsvRow {
                generation: r.generation,
                best_cost: r.best_cost,
                mean_cost: r.mean_cost,
                diversity: r.diversity,
                successes: r.successes,
                total_gain: r.total_gain,
            })
            .map_err(|e| EngineError::Csv(e.to_string()))?;
        }
        wr.flush().map_err(|e| EngineError::Csv(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads a CSV export back. The offspring column is not stored, so it is
    /// filled with `offspring_per_generation`.
    pub fn read_csv<R: Read>(r: R, offspring_per_generation: u64) -> Result<Self, EngineError> {
        let mut rd = csv::Reader::from_reader(r);
        let mut records = Vec::new();
        for row in rd.deserialize::<CsvRow>() {
            let row = row.map_err(|e| EngineError::Csv(e.to_string()))?;
            records.push(GenerationRecord {
                generation: row.generation,
                best_cost: row.best_cost,
                mean_cost: row.mean_cost,
                diversity: row.diversity,
                successes: row.successes,
                offspring: offspring_per_generation,
                total_gain: row.total_gain,
            });
        }
        Ok(Self { records })
    }
}

/// Gap of the lowest best cost recorded anywhere in the trace.
pub fn trajectory_metric(trace: &GenerationTrace, instance: &ProblemInstance) -> Result<f64, EngineError> {
    let min = trace.best_costs().fold(f64::INFINITY, f64::min);
    if trace.is_empty() {
        return Err(EngineError::EmptyTrace);
    }
    Ok(optimality_gap(min, instance.bks().value)?)
}
