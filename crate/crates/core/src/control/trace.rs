use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Variant;
use super::ControlError;
use crate::dsl::{OperatorSpec, ReasoningMode, SpecId};
use crate::engine::GenerationRecord;
use crate::meta::{BackendError, BackendReply, Exchange, MockBackend};
use crate::probe::RolloutReport;
use crate::problem::Domain;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbePurpose {
    /// Re-evaluation of the current algorithm population.
    Incumbents,
    /// Scoring of a freshly synthesized spec.
    Offspring,
    /// Full-horizon rollout of a static variant.
    Offline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerItem {
    ProbeRollouts,
    Reevaluations,
    OfflineRollouts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryView {
    pub id: SpecId,
    pub score: Option<f64>,
    pub born: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Header {
        schema_version: u32,
        instance: String,
        domain: Domain,
        bks: f64,
        variant: Variant,
        seed: u64,
        budget: u64,
        population_size: usize,
        algorithm_population_size: usize,
        horizon: usize,
        meta_generations: usize,
        probe_generations: usize,
        probe_rollouts: usize,
    },
    /// Full document of a spec, emitted once when it first appears.
    Spec { spec: OperatorSpec },
    StepStart {
        step: usize,
        generation: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wall_ms: Option<u64>,
    },
    Probe {
        step: usize,
        purpose: ProbePurpose,
        report: RolloutReport,
    },
    Ledger {
        step: usize,
        item: LedgerItem,
        units: u64,
        total: u64,
    },
    Backend { step: usize, exchange: Exchange },
    Synthesis {
        step: usize,
        mode: ReasoningMode,
        parents: Vec<SpecId>,
        analysis: Option<String>,
        direction: Option<String>,
        offspring: Option<SpecId>,
        failure: Option<String>,
    },
    Population { step: usize, entries: Vec<EntryView> },
    /// Probing stops here; later steps reuse the incumbent.
    BudgetFreeze { step: usize, spent: u64, needed: u64, budget: u64 },
    Apply {
        step: usize,
        spec_id: SpecId,
        from_generation: u64,
        records: Vec<GenerationRecord>,
        gaps: Vec<f64>,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Header { .. } => "header",
            Event::Spec { .. } => "spec",
            Event::StepStart { .. } => "step_start",
            Event::Probe { .. } => "probe",
            Event::Ledger { .. } => "ledger",
            Event::Backend { .. } => "backend",
            Event::Synthesis { .. } => "synthesis",
            Event::Population { .. } => "population",
            Event::BudgetFreeze { .. } => "budget_freeze",
            Event::Apply { .. } => "apply",
        }
    }
}

/// The event log of one run. One JSON object per line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ControlTrace {
    pub events: Vec<Event>,
}

pub struct HeaderView<'a> {
    pub instance: &'a str,
    pub domain: Domain,
    pub bks: f64,
    pub variant: Variant,
    pub seed: u64,
    pub budget: u64,
}

impl ControlTrace {
    pub fn push(&mut self, e: Event) {
        self.events.push(e);
    }

    pub fn header(&self) -> Result<HeaderView<'_>, ControlError> {
        match self.events.first() {
            Some(Event::Header {
                instance,
                domain,
                bks,
                variant,
                seed,
                budget,
                ..
            }) => Ok(HeaderView {
                instance,
                domain: *domain,
                bks: *bks,
                variant: *variant,
                seed: *seed,
                budget: *budget,
            }),
            _ => Err(ControlError::Trace("trace does not start with a header".into())),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), ControlError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
        f.write_all(self.to_jsonl().as_bytes()).map_err(io_err(path))?;
        f.flush().map_err(io_err(path))
    }

    /// Parses JSONL. The schema version is checked before anything else.
    pub fn from_jsonl(text: &str) -> Result<Self, ControlError> {
        Self::read_from(text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, ControlError> {
        let f = std::fs::File::open(path).map_err(io_err(path))?;
        Self::read_from(std::io::BufReader::new(f))
    }

    fn read_from(r: impl BufRead) -> Result<Self, ControlError> {
        let mut events = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| ControlError::Trace(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if events.is_empty() {
                let v: serde_json::Value =
                    serde_json::from_str(&line).map_err(|e| ControlError::Trace(format!("line 1: {e}")))?;
                let found = v.get("schema_version").and_then(serde_json::Value::as_u64);
                if found != Some(u64::from(SCHEMA_VERSION)) {
                    return Err(ControlError::Schema {
                        found: found.map_or_else(|| "none".to_string(), |n| n.to_string()),
                        expected: SCHEMA_VERSION,
                    });
                }
            }
            let e: Event =
                serde_json::from_str(&line).map_err(|e| ControlError::Trace(format!("line {}: {e}", i + 1)))?;
            events.push(e);
        }
        let trace = Self { events };
        trace.header()?;
        Ok(trace)
    }

    /// Every spec document in the trace, in order of appearance.
    pub fn specs(&self) -> Vec<&OperatorSpec> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Spec { spec } => Some(spec),
                _ => None,
            })
            .collect()
    }

    pub fn exchanges(&self) -> impl Iterator<Item = &Exchange> {
        self.events.iter().filter_map(|e| match e {
            Event::Backend { exchange, .. } => Some(exchange),
            _ => None,
        })
    }

    /// A back end that answers with the recorded replies, in order.
    pub fn replay_backend(&self) -> MockBackend {
        let mut mock = MockBackend::default();
        for x in self.exchanges() {
            match (&x.reply, &x.error) {
                (Some(r), _) => mock.push(Ok(r.clone())),
                (None, Some(e)) => mock.push(Err(BackendError::Replayed(e.clone()))),
                (None, None) => mock.push(Ok(BackendReply::default())),
            }
        }
        mock
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ControlError + '_ {
    move |e| ControlError::Io(format!("{}: {e}", path.display()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub probe_rollouts: u64,
    pub reevaluations: u64,
    pub offline_rollouts: u64,
    pub total: u64,
}

/// Totals the ledger events and checks them against the header budget.
pub fn budget_ledger(trace: &ControlTrace) -> Result<LedgerSummary, ControlError> {
    let budget = trace.header()?.budget;
    let mut s = LedgerSummary::default();
    for e in &trace.events {
        if let Event::Ledger { item, units, total, .. } = e {
            match item {
                LedgerItem::ProbeRollouts => s.probe_rollouts += units,
                LedgerItem::Reevaluations => s.reevaluations += units,
                LedgerItem::OfflineRollouts => s.offline_rollouts += units,
            }
            s.total += units;
            if s.total != *total {
                return Err(ControlError::Trace(format!(
                    "ledger running total {total} disagrees with recomputed {}",
                    s.total
                )));
            }
        }
    }
    if s.total > budget {
        return Err(ControlError::OverBudget { total: s.total, budget });
    }
    Ok(s)
}

/// One row of the convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub generation: u64,
    pub spec_id: SpecId,
    pub best_cost: f64,
    pub mean_cost: f64,
    pub diversity: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub instance: String,
    pub variant: Variant,
    pub seed: u64,
    pub final_gap: f64,
    pub best_cost: f64,
    pub best_generation: u64,
    pub generations: usize,
    pub ledger_total: u64,
    pub ledger: LedgerSummary,
    pub applied_specs: Vec<SpecId>,
}

/// Per-generation rows of the real trajectory.
pub fn convergence(trace: &ControlTrace) -> Vec<ConvergenceRow> {
    let mut rows = Vec::new();
    for e in &trace.events {
        if let Event::Apply { spec_id, records, gaps, .. } = e {
            for (r, g) in records.iter().zip(gaps) {
                rows.push(ConvergenceRow {
                    generation: r.generation,
                    spec_id: *spec_id,
                    best_cost: r.best_cost,
                    mean_cost: r.mean_cost,
                    diversity: r.diversity,
                    gap: *g,
                });
            }
        }
    }
    rows
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

/// Summary figures, derived from the trace alone.
pub fn summarize(trace: &ControlTrace) -> Result<RunSummary, ControlError> {
    let h = trace.header()?;
    let (instance, variant, seed) = (h.instance.to_string(), h.variant, h.seed);
    let ledger = budget_ledger(trace)?;
    let rows = convergence(trace);
    let best = rows
        .iter()
        .min_by(|a, b| a.best_cost.total_cmp(&b.best_cost))
        .ok_or_else(|| ControlError::Trace("trace has no applied generations".into()))?;
    let mut seen = BTreeSet::new();
    let applied_specs = rows
        .iter()
        .map(|r| r.spec_id)
        .filter(|id| seen.insert(*id))
        .collect();
    Ok(RunSummary {
        instance,
        variant,
        seed,
        final_gap: best.gap,
        best_cost: best.best_cost,
        best_generation: best.generation,
        generations: rows.len(),
        ledger_total: ledger.total,
        ledger,
        applied_specs,
    })
}
