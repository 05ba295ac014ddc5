use std::sync::Arc;
use std::time::{Duration, Instant};

use super::config::{BackendKind, RunConfig};
use super::trace::{ControlTrace, EntryView, Event, LedgerItem, ProbePurpose, SCHEMA_VERSION};
use super::ControlError;
use crate::dsl::{initial_specs, OperatorSpec, SpecId};
use crate::engine::{init_population, run_horizon, run_horizon_until, GenerationTrace, Population};
use crate::meta::{
    evolve_algorithms, initialize_with_backend, AlgorithmPopulation, Backend, EvolveOutcome, HttpBackend,
    MetaSettings, ScriptedBackend,
};
use crate::probe::{
    extract_features, origin_record, population_diversity, probe, CandidateReport, CandidateStatus, ProbeSettings,
    RolloutReport, TrajectoryFeatures,
};
use crate::problem::{load_instance, optimality_gap, BksRegistry, ProblemInstance};
use crate::rng::SeedStream;

pub fn load_instance_for(cfg: &RunConfig) -> Result<Arc<ProblemInstance>, ControlError> {
    let registry = BksRegistry::load(&cfg.instance.bks_registry)?;
    let format = cfg.instance.resolved_format()?;
    Ok(Arc::new(load_instance(&cfg.instance.path, format, &registry)?))
}

/// Builds the configured back end. The scripted one draws from the run seed.
pub fn make_backend(cfg: &RunConfig) -> Result<Box<dyn Backend>, ControlError> {
    Ok(match cfg.backend.kind {
        BackendKind::Scripted => Box::new(ScriptedBackend::new(SeedStream::new(cfg.run.seed).derive_named("backend"))),
        BackendKind::Http => Box::new(HttpBackend::new(&cfg.backend.http)?),
        BackendKind::Replay => {
            let path = cfg.backend.replay_trace.as_ref().expect("checked by RunConfig::check");
            Box::new(ControlTrace::read(path)?.replay_backend())
        }
    })
}

/// Loads the instance, builds the back end and runs.
pub fn execute(cfg: &RunConfig) -> Result<ControlTrace, ControlError> {
    let instance = load_instance_for(cfg)?;
    let mut backend = make_backend(cfg)?;
    run(cfg, instance, backend.as_mut())
}

/// Runs the configured variant to completion.
pub fn run(cfg: &RunConfig, instance: Arc<ProblemInstance>, backend: &mut dyn Backend) -> Result<ControlTrace, ControlError> {
    cfg.check()?;
    let mut r = Runner::new(cfg, instance, backend);
    r.header();
    if cfg.run.variant.is_static() {
        r.run_static()?;
    } else {
        r.run_dynamic()?;
    }
    Ok(r.trace)
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    instance: Arc<ProblemInstance>,
    backend: &'a mut dyn Backend,
    settings: MetaSettings,
    root: SeedStream,
    trace: ControlTrace,
    spent: u64,
    started: Instant,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a RunConfig, instance: Arc<ProblemInstance>, backend: &'a mut dyn Backend) -> Self {
        Self {
            cfg,
            instance,
            backend,
            settings: cfg.meta_settings(),
            root: SeedStream::new(cfg.run.seed),
            trace: ControlTrace::default(),
            spent: 0,
            started: Instant::now(),
        }
    }

    fn header(&mut self) {
        let r = &self.cfg.run;
        self.trace.push(Event::Header {
            schema_version: SCHEMA_VERSION,
            instance: self.instance.name().to_string(),
            domain: self.instance.domain(),
            bks: self.instance.bks().value,
            variant: r.variant,
            seed: r.seed,
            budget: r.budget,
            population_size: r.population_size,
            algorithm_population_size: r.algorithm_population_size,
            horizon: r.horizon,
            meta_generations: r.meta_generations,
            probe_generations: r.probe_generations,
            probe_rollouts: r.probe_rollouts,
        });
    }

    fn charge(&mut self, step: usize, item: LedgerItem, units: u64) {
        self.spent += units;
        self.trace.push(Event::Ledger {
            step,
            item,
            units,
            total: self.spent,
        });
    }

    fn initial_population(&mut self) -> Result<AlgorithmPopulation, ControlError> {
        let domain = self.instance.domain();
        let n = self.cfg.run.algorithm_population_size;
        let specs = if self.cfg.run.backend_initialization {
            let mut log = Vec::new();
            let res = initialize_with_backend(domain, n, self.backend, &self.settings, &mut log);
            for exchange in log {
                self.trace.push(Event::Backend { step: 0, exchange });
            }
            res?
        } else {
            initial_specs(domain, n)
        };
        let pop = AlgorithmPopulation::new(specs);
        for e in &pop.entries {
            self.trace.push(Event::Spec { spec: e.spec.clone() });
        }
        Ok(pop)
    }

    fn real_population(&self) -> Result<Population, ControlError> {
        Ok(init_population(
            self.instance.clone(),
            self.cfg.run.population_size,
            self.root.derive_named("init"),
        )?)
    }

    fn step_start(&mut self, step: usize, generation: u64) {
        let wall_ms = self
            .cfg
            .output
            .timestamps
            .then(|| self.started.elapsed().as_millis() as u64);
        self.trace.push(Event::StepStart {
            step,
            generation,
            wall_ms,
        });
    }

    /// Runs one horizon of the real trajectory and logs it. Returns the
    /// features of the window, origin included.
    fn apply(
        &mut self,
        step: usize,
        pop: &mut Population,
        spec: &OperatorSpec,
        origin_diversity: f64,
    ) -> Result<Option<TrajectoryFeatures>, ControlError> {
        let (next, window) = run_horizon(pop, spec, self.cfg.run.horizon, self.root.derive_named("real"))?;
        let bks = self.instance.bks().value;
        let gaps = window
            .records
            .iter()
            .map(|r| optimality_gap(r.best_cost, bks))
            .collect::<Result<Vec<_>, _>>()?;
        let mut full = GenerationTrace {
            records: vec![origin_record(pop, origin_diversity)],
        };
        full.extend(window.clone());
        let features = extract_features(&full, &self.instance).ok();
        self.trace.push(Event::Apply {
            step,
            spec_id: spec.id,
            from_generation: pop.generation,
            records: window.records,
            gaps,
        });
        *pop = next;
        Ok(features)
    }

    fn log_outcome(&mut self, step: usize, outcome: EvolveOutcome) {
        for exchange in outcome.exchanges {
            self.trace.push(Event::Backend { step, exchange });
        }
        self.trace.push(Event::Synthesis {
            step,
            mode: outcome.mode,
            parents: outcome.parents,
            analysis: outcome.gradient.as_ref().map(|g| g.analysis.clone()),
            direction: outcome.gradient.as_ref().map(|g| g.direction.clone()),
            offspring: outcome.offspring.as_ref().map(|s| s.id),
            failure: outcome.failure,
        });
        if let Some(spec) = outcome.offspring {
            self.trace.push(Event::Spec { spec });
        }
    }

    fn log_population(&mut self, step: usize, algs: &AlgorithmPopulation) {
        self.trace.push(Event::Population {
            step,
            entries: algs
                .entries
                .iter()
                .map(|e| EntryView {
                    id: e.spec.id,
                    score: e.score,
                    born: e.born,
                })
                .collect(),
        });
    }

    fn run_dynamic(&mut self) -> Result<(), ControlError> {
        let run = self.cfg.run.clone();
        let domain = self.instance.domain();
        let mut algs = self.initial_population()?;
        let mut pop = self.real_population()?;
        let probe_root = self.root.derive_named("probe");
        let meta_root = self.root.derive_named("meta");
        let psettings = ProbeSettings {
            t_probe: run.probe_generations,
            rollouts: run.probe_rollouts,
            time_limit: Some(Duration::from_secs(self.cfg.limits.probe_rollout_secs)),
        };
        let m = run.probe_rollouts as u64;
        let mut origin_div = population_diversity(&pop.members, self.root.derive_named("real").derive_named("origin"));
        let mut anchor: Option<(SpecId, TrajectoryFeatures)> = None;
        let mut frozen = false;

        for step in 1..=run.meta_generations {
            self.step_start(step, pop.generation);
            if !frozen {
                let needed = (algs.len() as u64 + 1) * m;
                if self.spent + needed > run.budget {
                    frozen = true;
                    self.trace.push(Event::BudgetFreeze {
                        step,
                        spent: self.spent,
                        needed,
                        budget: run.budget,
                    });
                }
            }
            if !frozen {
                let pstream = probe_root.derive(step as u64);
                let mut report = probe(&pop, &algs.specs(), &psettings, pstream)?;
                report.anchor_real = anchor.as_ref().map(|(_, f)| *f);
                let n = report.candidates.len() as u64;
                self.trace.push(Event::Probe {
                    step,
                    purpose: ProbePurpose::Incumbents,
                    report: report.clone(),
                });
                self.charge(step, LedgerItem::Reevaluations, n * m);

                let mut offspring_report: Option<RolloutReport> = None;
                let outcome = {
                    let pop_ref = &pop;
                    let mut scorer = |spec: &OperatorSpec| match probe(pop_ref, std::slice::from_ref(spec), &psettings, pstream) {
                        Ok(r) => {
                            let c = r.candidates[0].clone();
                            offspring_report = Some(r);
                            c
                        }
                        Err(e) => failed_candidate(spec.id, e.to_string()),
                    };
                    evolve_algorithms(
                        &mut algs,
                        &report,
                        anchor,
                        domain,
                        self.backend,
                        &self.settings,
                        meta_root.derive(step as u64),
                        &mut scorer,
                    )?
                };
                self.log_outcome(step, outcome);
                if let Some(report) = offspring_report {
                    self.trace.push(Event::Probe {
                        step,
                        purpose: ProbePurpose::Offspring,
                        report,
                    });
                    self.charge(step, LedgerItem::ProbeRollouts, m);
                }
                self.log_population(step, &algs);
            }

            let spec = algs.best().expect("population is never empty").spec.clone();
            let features = self.apply(step, &mut pop, &spec, origin_div)?;
            anchor = features.map(|f| (spec.id, f));
            if let Some(Event::Apply { records, .. }) = self.trace.events.last() {
                origin_div = records.last().map_or(origin_div, |r| r.diversity);
            }
        }
        Ok(())
    }

    fn run_static(&mut self) -> Result<(), ControlError> {
        let run = self.cfg.run.clone();
        let domain = self.instance.domain();
        let mut algs = self.initial_population()?;
        let offline = self.root.derive_named("offline");
        let fresh = init_population(self.instance.clone(), run.population_size, offline.derive_named("init"))?;
        let stream = offline.derive_named("rollouts");
        let meta_root = self.root.derive_named("meta");

        let frozen = if run.offline_synthesis {
            for i in 0..algs.len() {
                if self.spent + 1 > run.budget {
                    break;
                }
                let report = offline_rollout(self.cfg, &self.instance, &fresh, &algs.entries[i].spec, stream);
                let c = &report.candidates[0];
                algs.entries[i].score = c.score;
                algs.entries[i].features = c.features;
                self.trace.push(Event::Probe {
                    step: 0,
                    purpose: ProbePurpose::Offline,
                    report,
                });
                self.charge(0, LedgerItem::OfflineRollouts, 1);
            }
            let empty = RolloutReport {
                snapshot_hash: fresh.snapshot_hash(),
                generation: 0,
                t_probe: self.cfg.total_generations(),
                rollouts: 1,
                candidates: Vec::new(),
                anchor_real: None,
            };
            // Each attempt either charges one unit or fails synthesis, so
            // `budget` attempts bound the loop.
            for k in 1..=run.budget {
                if self.spent + 1 > run.budget {
                    break;
                }
                let mut offspring_report: Option<RolloutReport> = None;
                let outcome = {
                    let (cfg, instance) = (self.cfg, &self.instance);
                    let mut scorer = |spec: &OperatorSpec| {
                        let r = offline_rollout(cfg, instance, &fresh, spec, stream);
                        let c = r.candidates[0].clone();
                        offspring_report = Some(r);
                        c
                    };
                    evolve_algorithms(
                        &mut algs,
                        &empty,
                        None,
                        domain,
                        self.backend,
                        &self.settings,
                        meta_root.derive(k),
                        &mut scorer,
                    )?
                };
                self.log_outcome(0, outcome);
                if let Some(report) = offspring_report {
                    self.trace.push(Event::Probe {
                        step: 0,
                        purpose: ProbePurpose::Offline,
                        report,
                    });
                    self.charge(0, LedgerItem::OfflineRollouts, 1);
                }
                self.log_population(0, &algs);
            }
            algs.best().expect("population is never empty").spec.clone()
        } else {
            algs.entries[0].spec.clone()
        };

        let mut pop = self.real_population()?;
        let mut origin_div = population_diversity(&pop.members, self.root.derive_named("real").derive_named("origin"));
        for step in 1..=run.meta_generations {
            self.step_start(step, pop.generation);
            self.apply(step, &mut pop, &frozen, origin_div)?;
            if let Some(Event::Apply { records, .. }) = self.trace.events.last() {
                origin_div = records.last().map_or(origin_div, |r| r.diversity);
            }
        }
        Ok(())
    }
}

fn failed_candidate(spec_id: SpecId, error: String) -> CandidateReport {
    CandidateReport {
        spec_id,
        status: CandidateStatus::Failed,
        score: None,
        gaps: Vec::new(),
        features: None,
        error: Some(error),
    }
}

/// Full-length rollout from a fresh population; every candidate shares
/// the same start and the same stream.
fn offline_rollout(
    cfg: &RunConfig,
    instance: &ProblemInstance,
    fresh: &Population,
    spec: &OperatorSpec,
    stream: SeedStream,
) -> RolloutReport {
    let gens = cfg.total_generations();
    let deadline = Some(Instant::now() + Duration::from_secs(cfg.limits.full_rollout_secs));
    let result = run_horizon_until(fresh, spec, gens, stream, deadline)
        .map_err(|e| e.to_string())
        .and_then(|(end, trace)| {
            let gap = optimality_gap(end.best().cost, instance.bks().value).map_err(|e| e.to_string())?;
            let div = population_diversity(&fresh.members, stream.derive_named("origin"));
            let mut full = GenerationTrace {
                records: vec![origin_record(fresh, div)],
            };
            full.extend(trace);
            Ok((gap, extract_features(&full, instance).ok()))
        });
    let candidate = match result {
        Ok((gap, features)) => CandidateReport {
            spec_id: spec.id,
            status: CandidateStatus::Ok,
            score: Some(gap),
            gaps: vec![gap],
            features,
            error: None,
        },
        Err(e) => failed_candidate(spec.id, e),
    };
    RolloutReport {
        snapshot_hash: fresh.snapshot_hash(),
        generation: fresh.generation,
        t_probe: gens,
        rollouts: 1,
        candidates: vec![candidate],
        anchor_real: None,
    }
}
