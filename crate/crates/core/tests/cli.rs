mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use coevo_core::control::{budget_ledger, ControlTrace, RunConfig, RunSummary, Variant};
use coevo_core::dsl::seed_spec;
use coevo_core::problem::Domain;
use tempfile::TempDir;

fn coevo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coevo")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, cfg: &RunConfig) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, cfg.to_toml()).unwrap();
    p
}

fn small(instance: &str) -> RunConfig {
    let mut cfg = tiny_config(instance, Variant::Dyace, 1);
    cfg.run.budget = 40;
    cfg
}

fn run_into(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    coevo(&args)
}

fn read_summary(dir: &Path) -> (String, RunSummary) {
    let text = std::fs::read_to_string(dir.join("summary.json")).unwrap();
    let s = serde_json::from_str(&text).unwrap();
    (text, s)
}

#[test]
fn run_writes_three_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small("eil22.vrp"));
    let out = tmp.path().join("r");
    let o = run_into(&cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trace.jsonl", "summary.json", "convergence.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let (text, summary) = read_summary(&out);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["instance", "variant", "seed", "final_gap", "best_cost", "ledger_total", "ledger", "applied_specs"] {
        assert!(v.get(key).is_some(), "summary lacks {key}");
    }
    assert_eq!(summary.variant, Variant::Dyace);
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + summary.generations);
    assert!(csv.starts_with("generation,spec_id,best_cost,mean_cost,diversity,gap"));

    let again = tmp.path().join("r2");
    assert_eq!(code(&run_into(&cfg, &again, &[])), 0);
    assert_eq!(read_summary(&again).0, text);
    assert_eq!(
        std::fs::read(out.join("trace.jsonl")).unwrap(),
        std::fs::read(again.join("trace.jsonl")).unwrap()
    );
}

#[test]
fn flags_override_the_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small("eil22.vrp"));
    let out = tmp.path().join("s");
    let o = run_into(&cfg, &out, &["--variant", "static", "--seed", "4"]);
    assert_eq!(code(&o), 0);
    let (_, s) = read_summary(&out);
    assert_eq!((s.variant, s.seed), (Variant::Static, 4));
    assert_eq!(s.applied_specs.len(), 1);

    let specs = coevo(&["inspect", out.join("trace.jsonl").to_str().unwrap(), "--what", "specs"]);
    assert_eq!(code(&specs), 0);
    assert_eq!(stdout(&specs).lines().count(), 1);
}

#[test]
fn bad_configs_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[run]\npopulation_size = 1\n").unwrap();
    let o = run_into(&bad, &tmp.path().join("x"), &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let mut cfg = small("eil22.vrp");
    cfg.run.budget = 0;
    let zero = write_config(tmp.path(), "zero.toml", &cfg);
    assert_eq!(code(&run_into(&zero, &tmp.path().join("y"), &[])), 2);

    let unknown = tmp.path().join("unknown.toml");
    std::fs::write(&unknown, format!("{}\n[extra]\nkey = 1\n", small("eil22.vrp").to_toml())).unwrap();
    assert_eq!(code(&run_into(&unknown, &tmp.path().join("z"), &[])), 2);
}

#[test]
fn suite_aggregates_cells() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "eil22.toml", &small("eil22.vrp"));
    let out = tmp.path().join("suite");
    let o = coevo(&[
        "suite",
        "--config",
        cfg.to_str().unwrap(),
        "--variants",
        "dyace,static",
        "--seeds",
        "1,2,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let mut rdr = csv::Reader::from_path(out.join("matrix.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let variant = &row[col("variant")];
        assert_eq!(&row[col("cells")], "3");
        assert_eq!(&row[col("ok")], "3");
        assert_eq!(&row[col("seeds")], "1;2;3");
        let gaps: Vec<f64> = (1..=3)
            .map(|s| read_summary(&out.join("eil22").join(variant).join(s.to_string())).1.final_gap)
            .collect();
        let mean = gaps.iter().sum::<f64>() / 3.0;
        let std = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        assert!(close(row[col("mean_gap")].parse().unwrap(), mean, 1e-12));
        assert!(close(row[col("std_gap")].parse().unwrap(), std, 1e-12));
        let best = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(row[col("best_gap")].parse::<f64>().unwrap(), best);
    }
    let cells = std::fs::read_to_string(out.join("cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 7);
}

#[test]
fn suite_survives_a_failing_cell() {
    let tmp = TempDir::new().unwrap();
    let good = write_config(tmp.path(), "good.toml", &small("eil22.vrp"));
    let mut missing = small("eil22.vrp");
    missing.instance.path = tmp.path().join("gone.vrp");
    let bad = write_config(tmp.path(), "bad.toml", &missing);
    let out = tmp.path().join("suite");
    let o = coevo(&[
        "suite",
        "--config",
        bad.to_str().unwrap(),
        "--config",
        good.to_str().unwrap(),
        "--variants",
        "dyace",
        "--seeds",
        "1,2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_ne!(code(&o), 0);
    let mut rdr = csv::Reader::from_path(out.join("cells.csv")).unwrap();
    let status: Vec<(String, String)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[3].to_string())
        })
        .collect();
    assert_eq!(
        status,
        [
            ("gone".into(), "failed".into()),
            ("gone".into(), "failed".into()),
            ("eil22".into(), "ok".into()),
            ("eil22".into(), "ok".into())
        ]
    );
    assert!(out.join("eil22/dyace/2/summary.json").is_file());
}

#[test]
fn inspect_views_agree_with_the_trace() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = config("eil22.vrp", Variant::Dyace, 1);
    cfg.run.population_size = 10;
    cfg.run.algorithm_population_size = 2;
    cfg.run.probe_generations = 3;
    cfg.run.probe_rollouts = 1;
    let path = write_config(tmp.path(), "c.toml", &cfg);
    let out = tmp.path().join("r");
    assert_eq!(code(&run_into(&path, &out, &[])), 0);
    let trace_path = out.join("trace.jsonl");
    let t = trace_path.to_str().unwrap();

    let gaps = stdout(&coevo(&["inspect", t, "--what", "gaps"]));
    let mut lines = gaps.lines();
    assert_eq!(lines.next(), Some("generation,gap"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 150);
    assert!(rows[149].starts_with("150,"));

    let trace = ControlTrace::read(&trace_path).unwrap();
    let ledger = stdout(&coevo(&["inspect", t, "--what", "ledger"]));
    let total = budget_ledger(&trace).unwrap().total;
    assert!(ledger.lines().last().unwrap().ends_with(&format!("total {total} of 300")));

    let summary: RunSummary = serde_json::from_str(&stdout(&coevo(&["inspect", t]))).unwrap();
    assert_eq!(summary, read_summary(&out).1);

    let prompts = stdout(&coevo(&["inspect", t, "--what", "prompts"]));
    assert!(prompts.contains("=== step 1 Diagnosis"));
}

#[test]
fn inspect_rejects_foreign_schemas() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &small("eil22.vrp"));
    let out = tmp.path().join("r");
    assert_eq!(code(&run_into(&cfg, &out, &[])), 0);
    let text = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let old = tmp.path().join("old.jsonl");
    std::fs::write(&old, text.replacen("\"schema_version\":1", "\"schema_version\":0", 1)).unwrap();
    let o = coevo(&["inspect", old.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("schema"));

    let over = tmp.path().join("over.jsonl");
    std::fs::write(&over, text.replacen("\"budget\":40", "\"budget\":3", 1)).unwrap();
    assert_eq!(code(&coevo(&["inspect", over.to_str().unwrap(), "--what", "ledger"])), 4);
}

#[test]
fn validate_spec_reports_violations() {
    let tmp = TempDir::new().unwrap();
    let good = tmp.path().join("good.json");
    std::fs::write(&good, seed_spec(Domain::Jssp).serialize()).unwrap();
    let o = coevo(&["validate-spec", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("ok:"));

    let mut doc = seed_spec(Domain::Tsp).to_document();
    doc["parameters"]["crossover_rate"] = serde_json::json!(7.0);
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, doc.to_string()).unwrap();
    let o = coevo(&["validate-spec", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("crossover_rate"));

    assert_eq!(code(&coevo(&["validate-spec", good.to_str().unwrap(), "--domain", "tsp"])), 1);
    assert_eq!(code(&coevo(&["validate-spec", tmp.path().join("none.json").to_str().unwrap()])), 2);
}

#[test]
fn catalog_lists_primitives() {
    let o = coevo(&["list-catalog", "--domain", "jssp"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("local_search"));
}
