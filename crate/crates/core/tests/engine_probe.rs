mod common;

use std::sync::Arc;
use std::time::Duration;

use common::*;
use coevo_core::dsl::{initial_specs, OperatorSpec};
use coevo_core::engine::*;
use coevo_core::probe::*;
use coevo_core::problem::{optimality_gap, BksRegistry, Domain, InstanceFormat, ProblemInstance, load_instance};
use coevo_core::rng::SeedStream;
use rand::Rng;

fn bundled(file: &str, fmt: InstanceFormat) -> Arc<ProblemInstance> {
    let registry = BksRegistry::load(&data_dir().join("bks.txt")).unwrap();
    Arc::new(load_instance(&data_dir().join(file), fmt, &registry).unwrap())
}

#[test]
fn randomized_steps_never_lose_the_best() {
    let instances = [
        random_tsp("a", 10, 1),
        random_tsp("b", 16, 2),
        bundled("eil22.vrp", InstanceFormat::Cvrplib),
    ];
    let mut r = rng(77);
    let mut calls = 0;
    while calls < 10_000 {
        let inst = instances[r.random_range(0..instances.len())].clone();
        let specs = initial_specs(inst.domain(), 5);
        let n = r.random_range(2..10);
        let mut pop = init_population(inst, n, SeedStream::new(r.random())).unwrap();
        for _ in 0..50 {
            let spec = &specs[r.random_range(0..specs.len())];
            let (next, rec) = step(&pop, spec, SeedStream::new(r.random())).unwrap();
            assert!(next.best_ever.cost <= pop.best_ever.cost);
            assert!(next.best().cost <= pop.best().cost, "survivor selection dropped the elite");
            assert_eq!(next.len(), pop.len());
            assert_eq!(rec.generation, pop.generation + 1);
            assert_eq!(rec.offspring, n as u64);
            assert!(rec.successes <= rec.offspring);
            assert!((0.0..=1.0).contains(&rec.diversity));
            pop = next;
            calls += 1;
        }
    }
}

#[test]
fn horizons_compose() {
    let inst = random_tsp("c", 14, 3);
    let spec = &initial_specs(Domain::Tsp, 5)[2];
    let pop = init_population(inst, 10, SeedStream::new(5)).unwrap();
    let s = SeedStream::new(9);
    let (a, ta) = run_horizon(&pop, spec, 10, s).unwrap();
    let (mid, t1) = run_horizon(&pop, spec, 4, s).unwrap();
    let (b, t2) = run_horizon(&mid, spec, 6, s).unwrap();
    assert_eq!(a.snapshot_hash(), b.snapshot_hash());
    let mut joined = t1;
    joined.extend(t2);
    assert_eq!(ta, joined);
}

fn probe_fixture() -> (Population, Vec<OperatorSpec>) {
    let inst = random_tsp("tsp20", 20, 20);
    let mut specs = initial_specs(Domain::Tsp, 5);
    for (i, s) in specs.iter_mut().enumerate() {
        s.id = coevo_core::dsl::SpecId(i as u64 + 1);
    }
    let pop = init_population(inst, 30, SeedStream::new(8)).unwrap();
    (pop, specs)
}

#[test]
fn probe_score_equals_mean_of_replayed_rollouts() {
    let (pop, specs) = probe_fixture();
    let settings = ProbeSettings {
        t_probe: 30,
        rollouts: 4,
        time_limit: None,
    };
    let stream = SeedStream::new(1234).derive(7);
    let report = probe(&pop, &specs, &settings, stream).unwrap();
    assert_eq!(report.snapshot_hash, pop.snapshot_hash());
    let bks = pop.instance.bks().value;
    for (spec, cand) in specs.iter().zip(&report.candidates) {
        let gaps: Vec<f64> = (0..4)
            .map(|r| {
                let (end, _) = run_horizon(&pop, spec, 30, rollout_stream(stream, r)).unwrap();
                optimality_gap(end.best().cost, bks).unwrap()
            })
            .collect();
        assert_eq!(cand.gaps, gaps);
        let mean = (gaps[0] + gaps[1] + gaps[2] + gaps[3]) / 4.0;
        assert_eq!(cand.score, Some(mean));
        assert_eq!(cand.status, CandidateStatus::Ok);
    }
}

#[test]
fn probing_alone_matches_probing_together() {
    let (pop, specs) = probe_fixture();
    let settings = ProbeSettings {
        t_probe: 5,
        rollouts: 2,
        time_limit: None,
    };
    let stream = SeedStream::new(3);
    let all = probe(&pop, &specs, &settings, stream).unwrap();
    for (i, spec) in specs.iter().enumerate() {
        let one = probe(&pop, std::slice::from_ref(spec), &settings, stream).unwrap();
        assert_eq!(one.candidates[0], all.candidates[i]);
    }
}

#[test]
fn timed_out_rollouts_fail_the_candidate() {
    let (pop, specs) = probe_fixture();
    let settings = ProbeSettings {
        t_probe: 5,
        rollouts: 2,
        time_limit: Some(Duration::ZERO),
    };
    let report = probe(&pop, &specs, &settings, SeedStream::new(1)).unwrap();
    for c in &report.candidates {
        assert_eq!(c.status, CandidateStatus::Failed);
        assert_eq!(c.score, None);
        assert!(c.error.is_some());
        assert!(c.gaps.is_empty() || c.gaps.len() < 2);
    }
}

#[test]
fn probe_rejects_bad_settings() {
    let (pop, specs) = probe_fixture();
    let s = SeedStream::new(0);
    let short = ProbeSettings {
        t_probe: 1,
        ..ProbeSettings::default()
    };
    assert_eq!(probe(&pop, &specs, &short, s).unwrap_err(), ProbeError::HorizonTooShort(1));
    assert_eq!(
        probe(&pop, &[], &ProbeSettings::default(), s).unwrap_err(),
        ProbeError::NoCandidates
    );
    assert_eq!(score(&[]).unwrap_err(), ProbeError::EmptyScores);
}

#[test]
fn features_match_recomputation_from_csv_exports() {
    let instances = [
        random_tsp("f1", 15, 11),
        bundled("eil22.vrp", InstanceFormat::Cvrplib),
        bundled("ta01.txt", InstanceFormat::Taillard),
    ];
    let mut traces = 0;
    for k in 0..25u64 {
        let inst = instances[k as usize % instances.len()].clone();
        let specs = initial_specs(inst.domain(), 5);
        let spec = &specs[k as usize % specs.len()];
        let n = 8 + (k as usize % 5);
        let pop = init_population(inst.clone(), n, SeedStream::new(k)).unwrap();
        let (_, trace) = run_horizon(&pop, spec, 3 + (k as usize % 12), SeedStream::new(100 + k)).unwrap();

        let csv = trace.to_csv();
        let reread = GenerationTrace::read_csv(csv.as_bytes(), n as u64).unwrap();
        assert_eq!(reread, trace, "CSV export is lossy");

        let got = extract_features(&trace, &inst).unwrap().values();
        let want = features_from_csv(&csv, n as f64, inst.bks().value);
        for (i, (g, w)) in got.iter().zip(want).enumerate() {
            assert!(close(*g, w, 1e-12), "trace {k} field {}: {g} vs {w}", TrajectoryFeatures::FIELDS[i]);
        }
        traces += 1;
    }
    assert_eq!(traces, 25);
}

#[test]
fn feature_extraction_needs_three_records() {
    let inst = random_tsp("g", 8, 1);
    let pop = init_population(inst.clone(), 4, SeedStream::new(1)).unwrap();
    let (_, trace) = run_horizon(&pop, &initial_specs(Domain::Tsp, 1)[0], 2, SeedStream::new(1)).unwrap();
    assert_eq!(extract_features(&trace, &inst).unwrap_err(), ProbeError::TraceTooShort(2));
}

#[test]
fn diversity_is_exact_for_small_populations() {
    let inst = random_tsp("h", 9, 2);
    let pop = init_population(inst, 6, SeedStream::new(4)).unwrap();
    let m = &pop.members;
    let mut sum = 0.0;
    let mut pairs = 0.0;
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            sum += positional_distance(&m[i].encoding, &m[j].encoding);
            pairs += 1.0;
        }
    }
    let d = population_diversity(m, SeedStream::new(0));
    assert!(close(d, sum / pairs, 1e-12));
    assert_eq!(d, population_diversity(m, SeedStream::new(99)));
}
