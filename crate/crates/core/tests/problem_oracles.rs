mod common;

use common::*;
use coevo_core::problem::*;
use proptest::prelude::*;

fn jssp_cases(jobs: usize, machines: usize, count: u64) {
    for seed in 0..count {
        let inst = random_jssp(jobs, machines, &mut rng(1000 * jobs as u64 + seed));
        let optimum = exhaustive_makespan(&inst);
        let mut decoded_best = u64::MAX;
        for seq in all_sequences(jobs, machines) {
            let ms = jssp_makespan(&inst, &seq);
            let oracle = makespan_of_orders(&inst, &orders_of_sequence(&inst, &seq)).expect("sequence orders are acyclic");
            assert_eq!(ms, oracle, "decoder disagrees with longest path on {seq:?}");
            decoded_best = decoded_best.min(ms);
        }
        assert_eq!(decoded_best, optimum, "best decoded schedule is not optimal (seed {seed})");
    }
}

#[test]
fn jssp_2x2_matches_exhaustive_scheduler() {
    jssp_cases(2, 2, 20);
}

#[test]
fn jssp_3x3_matches_exhaustive_scheduler() {
    jssp_cases(3, 3, 20);
}

#[test]
fn held_karp_tours_evaluate_to_their_optimum() {
    for n in 3..=9 {
        for seed in 0..5 {
            let coords = random_coords(n, &mut rng(seed * 31 + n as u64));
            let (tour, opt) = held_karp(&coords);
            let bks = Bks { value: opt, metric: BksMetric::Exact };
            let inst = ProblemInstance::Tsp(TspInstance::new("hk", coords, bks).unwrap());
            inst.check_encoding(&tour).unwrap();
            let cost = inst.cost(&tour);
            assert!(close(cost, opt, 1e-9), "n={n}: {cost} vs {opt}");
            assert!(optimality_gap(cost, opt).unwrap().abs() < 1e-7);
        }
    }
}

#[test]
fn bundled_optimal_tours_have_zero_gap() {
    let registry = BksRegistry::load(&data_dir().join("bks.txt")).unwrap();
    for name in ["eil51", "berlin52"] {
        let inst = load_instance(&data_dir().join(format!("{name}.tsp")), InstanceFormat::Tsplib, &registry).unwrap();
        let text = std::fs::read_to_string(data_dir().join(format!("{name}.opt.tour"))).unwrap();
        let tour = parse_tour(&text).unwrap();
        let gap = optimality_gap(inst.cost(&tour), inst.bks().value).unwrap();
        assert!(gap.abs() < 1e-6, "{name}: gap {gap}");
    }
}

#[test]
fn cvrp_split_respects_capacity_and_visits_everyone() {
    let registry = BksRegistry::load(&data_dir().join("bks.txt")).unwrap();
    let inst = load_instance(&data_dir().join("eil22.vrp"), InstanceFormat::Cvrplib, &registry).unwrap();
    let ProblemInstance::Cvrp(cvrp) = &inst else { panic!("not a CVRP instance") };
    let mut r = rng(5);
    for _ in 0..200 {
        let mut tour = inst.symbols();
        rand::seq::SliceRandom::shuffle(tour.as_mut_slice(), &mut r);
        let routes = greedy_split(cvrp, &tour);
        let report = check_routes(cvrp, &routes);
        assert!(report.is_feasible());
        let mut seen: Vec<u32> = routes.concat();
        seen.sort_unstable();
        let mut expect = inst.symbols();
        expect.sort_unstable();
        assert_eq!(seen, expect);
        assert!(close(inst.cost(&tour), routes_length(cvrp, &routes), 1e-12));
    }
}

#[test]
fn ta01_random_sequences_respect_lower_bound() {
    let registry = BksRegistry::load(&data_dir().join("bks.txt")).unwrap();
    let inst = load_instance(&data_dir().join("ta01.txt"), InstanceFormat::Taillard, &registry).unwrap();
    let ProblemInstance::Jssp(j) = &inst else { panic!("not a JSSP instance") };
    let mut r = rng(9);
    for _ in 0..100 {
        let mut seq = inst.symbols();
        rand::seq::SliceRandom::shuffle(seq.as_mut_slice(), &mut r);
        assert!(inst.cost(&seq) >= j.trivial_lower_bound() as f64);
        assert!(inst.cost(&seq) >= inst.bks().value);
    }
}

#[test]
fn malformed_encodings_are_rejected() {
    let inst = random_tsp("t", 6, 1);
    assert!(inst.check_encoding(&[0, 1, 2, 3, 4]).is_err());
    assert!(inst.check_encoding(&[0, 1, 2, 3, 4, 4]).is_err());
    assert!(inst.check_encoding(&[0, 1, 2, 3, 4, 9]).is_err());
    assert!(inst.check_encoding(&[5, 1, 2, 3, 4, 0]).is_ok());
}

#[test]
fn gap_rejects_non_positive_reference() {
    assert!(optimality_gap(10.0, 0.0).is_err());
    assert!(optimality_gap(10.0, -3.0).is_err());
    assert!(optimality_gap(10.0, f64::NAN).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gap_is_zero_at_bks_and_linear_in_cost(bks in 1e-3f64..1e6, a in -1e6f64..1e6, b in -1e6f64..1e6, t in 0.0f64..1.0) {
        prop_assert_eq!(optimality_gap(bks, bks).unwrap(), 0.0);
        let ga = optimality_gap(a, bks).unwrap();
        let gb = optimality_gap(b, bks).unwrap();
        let gm = optimality_gap(t * a + (1.0 - t) * b, bks).unwrap();
        let scale = ga.abs().max(gb.abs()).max(1.0);
        prop_assert!((gm - (t * ga + (1.0 - t) * gb)).abs() <= 1e-9 * scale);
    }
}
