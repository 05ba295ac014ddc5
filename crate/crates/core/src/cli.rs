//! Command-line front end of the `coevo` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::control::{
    budget_ledger, convergence, convergence_csv, execute, summarize, BackendKind, ControlError, ControlTrace, Event,
    RunConfig, RunSummary, Variant,
};
use crate::dsl::{grammar_reference, validate_spec, SpecId};
use crate::problem::Domain;

pub const EXIT_INVALID: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_BUDGET: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "coevo", version, about = "Co-evolve search operators with the populations they drive")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one configuration and write trace.jsonl, summary.json and convergence.csv.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        backend: Option<BackendKind>,
        /// Output directory; overrides `[output].dir`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run every (config, variant, seed) cell and aggregate.
    Suite {
        #[arg(short, long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "dyace,static")]
        variants: Vec<Variant>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print one view of a recorded trace.
    Inspect {
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "summary")]
        what: View,
    },
    /// Check an operator spec document.
    ValidateSpec {
        file: PathBuf,
        /// Required when the document has no `domain` field.
        #[arg(long)]
        domain: Option<Domain>,
    },
    /// Print the primitive catalog and grammar for a domain.
    ListCatalog {
        #[arg(long, default_value = "tsp")]
        domain: Domain,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum View {
    Summary,
    Gaps,
    Specs,
    Ledger,
    Prompts,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

type CliResult = Result<(), (u8, String)>;

/// Exit code for a control error.
pub fn exit_code(e: &ControlError) -> u8 {
    match e {
        ControlError::Config(_) | ControlError::Schema { .. } => EXIT_CONFIG,
        ControlError::OverBudget { .. } => EXIT_BUDGET,
        _ => EXIT_RUNTIME,
    }
}

fn fail(e: ControlError) -> (u8, String) {
    (exit_code(&e), e.to_string())
}

pub fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Run {
            config,
            seed,
            variant,
            backend,
            out,
        } => {
            let mut cfg = RunConfig::load(&config).map_err(fail)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(v) = variant {
                cfg.run.variant = v;
            }
            if let Some(b) = backend {
                cfg.backend.kind = b;
            }
            cfg.check().map_err(fail)?;
            let dir = out
                .or_else(|| cfg.output.dir.clone())
                .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", cfg.run.variant, cfg.run.seed)));
            let summary = run_to_dir(&cfg, &dir).map_err(fail)?;
            println!(
                "{} {} seed {}: gap {:.3}% (cost {}), {} budget units, artifacts in {}",
                summary.instance,
                summary.variant,
                summary.seed,
                summary.final_gap,
                summary.best_cost,
                summary.ledger_total,
                dir.display()
            );
            Ok(())
        }
        Command::Suite {
            config,
            variants,
            seeds,
            out,
        } => suite(&config, &variants, &seeds, &out),
        Command::Inspect { trace, what } => {
            let trace = ControlTrace::read(&trace).map_err(fail)?;
            print!("{}", inspect(&trace, what).map_err(fail)?);
            Ok(())
        }
        Command::ValidateSpec { file, domain } => validate_file(&file, domain),
        Command::ListCatalog { domain } => {
            print!("{}", grammar_reference(domain));
            Ok(())
        }
    }
}

/// Runs and writes the three artifacts. The trace is written before the
/// ledger check, so an over-budget run can still be inspected.
pub fn run_to_dir(cfg: &RunConfig, dir: &Path) -> Result<RunSummary, ControlError> {
    let trace = execute(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| ControlError::Io(format!("{}: {e}", dir.display())))?;
    trace.write(&dir.join("trace.jsonl"))?;
    let summary = summarize(&trace)?;
    write_file(
        &dir.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    write_file(&dir.join("convergence.csv"), &convergence_csv(&convergence(&trace)))?;
    Ok(summary)
}

fn write_file(path: &Path, text: &str) -> Result<(), ControlError> {
    std::fs::write(path, text).map_err(|e| ControlError::Io(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct CellRow {
    instance: String,
    variant: Variant,
    seed: u64,
    status: &'static str,
    final_gap: Option<f64>,
    best_cost: Option<f64>,
    ledger_total: Option<u64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct MatrixRow {
    instance: String,
    variant: Variant,
    cells: usize,
    ok: usize,
    /// Semicolon-separated seeds of the cells.
    seeds: String,
    mean_gap: Option<f64>,
    std_gap: Option<f64>,
    best_gap: Option<f64>,
}

fn suite(configs: &[PathBuf], variants: &[Variant], seeds: &[u64], out: &Path) -> CliResult {
    let mut cells = Vec::new();
    for path in configs {
        let base = RunConfig::load(path).map_err(fail)?;
        let stem = base
            .instance
            .path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("instance")
            .to_string();
        for &variant in variants {
            for &seed in seeds {
                let mut cfg = base.clone();
                cfg.run.variant = variant;
                cfg.run.seed = seed;
                let dir = out.join(&stem).join(variant.as_str()).join(seed.to_string());
                let row = match run_to_dir(&cfg, &dir) {
                    Ok(s) => CellRow {
                        instance: stem.clone(),
                        variant,
                        seed,
                        status: "ok",
                        final_gap: Some(s.final_gap),
                        best_cost: Some(s.best_cost),
                        ledger_total: Some(s.ledger_total),
                        error: None,
                    },
                    Err(e) => {
                        eprintln!("cell {stem}/{variant}/{seed} failed: {e}");
                        CellRow {
                            instance: stem.clone(),
                            variant,
                            seed,
                            status: "failed",
                            final_gap: None,
                            best_cost: None,
                            ledger_total: None,
                            error: Some(e.to_string()),
                        }
                    }
                };
                cells.push(row);
            }
        }
    }

    let mut matrix = Vec::new();
    let mut keys: Vec<(String, Variant)> = Vec::new();
    for c in &cells {
        if !keys.iter().any(|(i, v)| *i == c.instance && *v == c.variant) {
            keys.push((c.instance.clone(), c.variant));
        }
    }
    for (instance, variant) in keys {
        let group: Vec<&CellRow> = cells
            .iter()
            .filter(|c| c.instance == instance && c.variant == variant)
            .collect();
        let gaps: Vec<f64> = group.iter().filter_map(|c| c.final_gap).collect();
        let n = gaps.len() as f64;
        let mean = (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / n);
        let std = mean.filter(|_| gaps.len() > 1).map(|m| {
            (gaps.iter().map(|g| (g - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        });
        matrix.push(MatrixRow {
            instance,
            variant,
            cells: group.len(),
            ok: gaps.len(),
            seeds: group.iter().map(|c| c.seed.to_string()).collect::<Vec<_>>().join(";"),
            mean_gap: mean,
            std_gap: std,
            best_gap: gaps.iter().copied().reduce(f64::min),
        });
    }

    std::fs::create_dir_all(out).map_err(|e| (EXIT_RUNTIME, format!("{}: {e}", out.display())))?;
    write_csv(&out.join("cells.csv"), &cells)?;
    write_csv(&out.join("matrix.csv"), &matrix)?;
    let failed = cells.iter().filter(|c| c.status != "ok").count();
    println!("{} cells, {} failed; results in {}", cells.len(), failed, out.display());
    if failed > 0 {
        Err((EXIT_RUNTIME, format!("{failed} suite cell(s) failed")))
    } else {
        Ok(())
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult {
    let err = |e: csv::Error| (EXIT_RUNTIME, format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| (EXIT_RUNTIME, e.to_string()))
}

/// Renders one view of a trace as text.
pub fn inspect(trace: &ControlTrace, what: View) -> Result<String, ControlError> {
    let mut out = String::new();
    match what {
        View::Summary => {
            out = serde_json::to_string_pretty(&summarize(trace)?).expect("summary serializes");
            out.push('\n');
        }
        View::Gaps => {
            out.push_str("generation,gap\n");
            for r in convergence(trace) {
                let _ = writeln!(out, "{},{}", r.generation, r.gap);
            }
        }
        View::Specs => {
            let specs = trace.specs();
            let mut last: Option<SpecId> = None;
            for e in &trace.events {
                let Event::Apply {
                    step,
                    spec_id,
                    from_generation,
                    ..
                } = e
                else {
                    continue;
                };
                if last == Some(*spec_id) {
                    continue;
                }
                last = Some(*spec_id);
                let spec = specs.iter().find(|s| s.id == *spec_id);
                let mode = spec.and_then(|s| s.lineage.mode).map_or("seed", |m| m.as_str());
                let parents = spec
                    .map(|s| s.lineage.parents.iter().map(ToString::to_string).collect::<Vec<_>>().join("+"))
                    .filter(|p| !p.is_empty())
                    .unwrap_or_else(|| "-".into());
                let title = spec.map_or("", |s| s.title());
                let _ = writeln!(
                    out,
                    "step {step:>3}  gen {from_generation:>4}  {spec_id:<5} {mode:<8} parents {parents:<10} {title}"
                );
            }
        }
        View::Ledger => {
            for e in &trace.events {
                if let Event::Ledger {
                    step,
                    item,
                    units,
                    total,
                } = e
                {
                    let _ = writeln!(out, "step {step:>3}  {:<16} +{units:<4} total {total}", format!("{item:?}"));
                }
            }
            let s = budget_ledger(trace)?;
            let _ = writeln!(
                out,
                "probe_rollouts {}  reevaluations {}  offline_rollouts {}  total {} of {}",
                s.probe_rollouts,
                s.reevaluations,
                s.offline_rollouts,
                s.total,
                trace.header()?.budget
            );
        }
        View::Prompts => {
            for e in &trace.events {
                if let Event::Backend { step, exchange } = e {
                    let r = &exchange.request;
                    let mode = r.mode.map_or("init", |m| m.as_str());
                    let _ = writeln!(
                        out,
                        "=== step {step} {:?} {mode} attempt {} ===\n{}",
                        r.stage, r.attempt, r.prompt
                    );
                }
            }
        }
    }
    Ok(out)
}

fn validate_file(path: &Path, domain: Option<Domain>) -> CliResult {
    let text = std::fs::read_to_string(path).map_err(|e| (EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    let domain = match domain {
        Some(d) => d,
        None => serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| v.get("domain")?.as_str()?.parse().ok())
            .ok_or_else(|| (EXIT_CONFIG, "no --domain given and the document has no valid domain".to_string()))?,
    };
    match validate_spec(&text, domain) {
        Ok(spec) => {
            println!(
                "ok: {} ({} nodes, depth {})",
                spec.title(),
                spec.graph.node_count(),
                spec.graph.depth()
            );
            Ok(())
        }
        Err(violations) => {
            for v in &violations {
                println!("{v}");
            }
            Err((EXIT_INVALID, format!("{} violation(s)", violations.len())))
        }
    }
}
