mod common;

use std::sync::Arc;

use common::*;
use coevo_core::dsl::*;
use coevo_core::engine::init_population;
use coevo_core::problem::{BksRegistry, Domain, InstanceFormat, load_instance};
use coevo_core::rng::SeedStream;
use serde_json::json;

#[test]
fn tree_edit_distance_matches_brute_force_mappings() {
    let labels = ["a", "b", "c"];
    let mut r = rng(42);
    for i in 0..100 {
        let a = random_tree(5, &labels, &mut r);
        let b = random_tree(5, &labels, &mut r);
        assert_eq!(labeled_tree_distance(&a, &b), brute_force_ted(&a, &b), "pair {i}: {a:?} vs {b:?}");
    }
}

#[test]
fn tree_edit_distance_is_a_metric_on_catalog_specs() {
    let specs: Vec<OperatorSpec> = Domain::ALL.iter().flat_map(|&d| initial_specs(d, 5)).collect();
    for a in &specs {
        assert_eq!(tree_edit_distance(&a.graph, &a.graph), 0);
        for b in &specs {
            let ab = tree_edit_distance(&a.graph, &b.graph);
            assert_eq!(ab, tree_edit_distance(&b.graph, &a.graph));
            for c in &specs {
                assert!(ab <= tree_edit_distance(&a.graph, &c.graph) + tree_edit_distance(&c.graph, &b.graph));
            }
        }
    }
}

#[test]
fn catalog_specs_round_trip_bit_identically() {
    for d in Domain::ALL {
        for spec in initial_specs(d, 5) {
            let text = spec.serialize();
            let back = validate_spec(&text, d).unwrap();
            assert_eq!(back.serialize(), text);
            assert_eq!(back, spec);
        }
    }
}

fn seed_doc() -> serde_json::Value {
    seed_spec(Domain::Tsp).to_document()
}

#[test]
fn slightly_out_of_range_values_are_clamped() {
    let mut doc = seed_doc();
    doc["parameters"]["crossover_rate"] = json!(1.03);
    let spec = validate_value(&doc, Domain::Tsp).unwrap();
    assert_eq!(spec.params["crossover_rate"], 1.0);

    doc["parameters"]["crossover_rate"] = json!(1.2);
    let errs = validate_value(&doc, Domain::Tsp).unwrap_err();
    assert!(errs.iter().any(|e| matches!(e, SpecViolation::OutOfBounds { .. })), "{errs:?}");
}

#[test]
fn structural_violations_are_reported() {
    let mut doc = seed_doc();
    doc["graph"]["children"][1]["primitive"] = json!("warp");
    let errs = validate_value(&doc, Domain::Tsp).unwrap_err();
    assert!(errs.iter().any(|e| matches!(e, SpecViolation::UnknownPrimitive { .. })), "{errs:?}");

    let mut doc = seed_doc();
    doc["graph"]["children"][2]["params"]["rate"] = json!("undefined_param");
    let errs = validate_value(&doc, Domain::Tsp).unwrap_err();
    assert_eq!(errs, vec![SpecViolation::MissingParameter("undefined_param".into())]);

    let mut two_sel = seed_doc();
    let sel = two_sel["graph"]["children"][0].clone();
    two_sel["graph"]["children"].as_array_mut().unwrap().push(sel);
    let errs = validate_value(&two_sel, Domain::Tsp).unwrap_err();
    assert!(errs.contains(&SpecViolation::SelectionCount(2)), "{errs:?}");

    assert!(validate_value(&seed_doc(), Domain::Jssp).is_err());
}

#[test]
fn local_search_is_jssp_only() {
    let jssp = seed_spec(Domain::Jssp).to_document();
    assert!(jssp.to_string().contains("local_search"));
    let mut doc = jssp.clone();
    doc["domain"] = json!("tsp");
    assert!(validate_value(&doc, Domain::Tsp).is_err());
}

#[test]
fn offspring_are_valid_encodings_in_every_domain() {
    let registry = BksRegistry::load(&data_dir().join("bks.txt")).unwrap();
    let files = [
        ("ta01.txt", InstanceFormat::Taillard),
        ("eil51.tsp", InstanceFormat::Tsplib),
        ("eil22.vrp", InstanceFormat::Cvrplib),
    ];
    for (file, fmt) in files {
        let inst = Arc::new(load_instance(&data_dir().join(file), fmt, &registry).unwrap());
        let pop = init_population(inst.clone(), 10, SeedStream::new(3)).unwrap();
        for spec in initial_specs(inst.domain(), 5) {
            let kids = apply_operator(&spec, &pop, SeedStream::new(11)).unwrap();
            assert_eq!(kids.len(), pop.len());
            for k in &kids {
                inst.check_encoding(&k.encoding).unwrap();
                assert_eq!(k.cost, inst.cost(&k.encoding));
                assert!(k.parents.iter().all(|&p| p < pop.len()));
            }
            let again = apply_operator(&spec, &pop, SeedStream::new(11)).unwrap();
            assert_eq!(kids, again, "{file}: interpreter is not deterministic");
        }
    }
}

#[test]
fn identity_crossover_without_mutation_copies_parents() {
    let inst = random_tsp("t", 12, 4);
    let pop = init_population(inst, 8, SeedStream::new(1)).unwrap();
    let mut b = GraphBuilder::new();
    let nodes = vec![
        b.primitive(NodeKind::Selection, "tournament", &[("size", 2.0)]),
        b.primitive(NodeKind::Crossover, "identity", &[]),
    ];
    let spec = b.finish(Domain::Tsp, "copy", GraphNode::Sequence(nodes));
    for k in apply_operator(&spec, &pop, SeedStream::new(2)).unwrap() {
        assert_eq!(k.parents[0], k.parents[1]);
        assert_eq!(k.encoding, pop.members[k.parents[0]].encoding);
    }
}

#[test]
fn node_cap_and_domain_mismatch_are_errors() {
    let inst = random_tsp("t", 10, 5);
    let pop = init_population(inst, 6, SeedStream::new(1)).unwrap();
    let spec = seed_spec(Domain::Tsp);
    assert_eq!(
        apply_operator_capped(&spec, &pop, SeedStream::new(0), 2).unwrap_err(),
        InterpError::BudgetExceeded(2)
    );
    let jssp = seed_spec(Domain::Jssp);
    assert!(matches!(
        apply_operator(&jssp, &pop, SeedStream::new(0)),
        Err(InterpError::DomainMismatch { .. })
    ));
}

#[test]
fn published_schema_lists_the_catalog() {
    let path = data_dir().join("../schema/operator-spec.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    for (def, domain) in [("nodeJssp", Domain::Jssp), ("nodePermutation", Domain::Tsp), ("nodePermutation", Domain::Cvrp)] {
        let mut listed = Vec::new();
        for v in schema["$defs"][def]["oneOf"].as_array().unwrap() {
            let kind = v["properties"]["kind"]["const"].as_str().unwrap();
            for name in v["properties"]["primitive"]["enum"].as_array().into_iter().flatten() {
                listed.push(format!("{kind}/{}", name.as_str().unwrap()));
            }
        }
        let mut catalog: Vec<String> = catalog_primitives(domain)
            .iter()
            .filter(|p| !matches!(p.kind, NodeKind::Sequence | NodeKind::Choice | NodeKind::Gate))
            .map(|p| format!("{}/{}", p.kind, p.name))
            .collect();
        listed.sort();
        catalog.sort();
        assert_eq!(listed, catalog, "{domain:?}");
    }
    assert_eq!(schema["properties"]["version"]["const"], json!(1));
}
