//! Reply generator of the scripted back end: random recombinations of
//! catalog primitives, shaped by the reasoning mode.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::dsl::{
    catalog_primitives, find_primitive, seed_spec, validate_spec, GraphBuilder, GraphNode, NodeKind, OperatorSpec,
    ParamDescriptor, ReasoningMode, WEIGHT_BOUNDS,
};
use crate::problem::Domain;
use crate::rng::{SeedStream, StreamRng};

pub fn diagnosis_reply(mode: Option<ReasoningMode>, parents: &[OperatorSpec]) -> String {
    let names: Vec<String> = parents.iter().map(|p| format!("{} ({})", p.id, p.title())).collect();
    let direction = match mode {
        Some(ReasoningMode::Combine) => "Keep the stronger parent's skeleton and import one operator from the other.",
        Some(ReasoningMode::Mutate) => "Adjust one operator or a few parameters of the parent.",
        Some(ReasoningMode::Explore) => "Assemble a fresh operator graph from the catalog.",
        None => "Start from a plain catalog configuration.",
    };
    format!(
        "<analysis>Scripted review of {}.</analysis>\n<direction>{direction}</direction>\n",
        if names.is_empty() { "no parents".to_string() } else { names.join(" and ") }
    )
}

pub fn coding_reply(domain: Domain, mode: Option<ReasoningMode>, parents: &[OperatorSpec], stream: SeedStream) -> String {
    let mut rng = stream.rng();
    let (description, params, graph) = generate(domain, mode, parents, &mut rng);
    format!(
        "<description>{description}</description>\n<parameter>{}</parameter>\n<code>{}</code>\n",
        serde_json::to_string(&params).expect("params serialize"),
        graph.to_json()
    )
}

/// Upper end of the range random values are drawn from: wide enough to
/// matter, narrow enough to keep rollouts cheap.
fn soft_upper(d: &ParamDescriptor) -> f64 {
    d.upper.min((2.0 * d.default).max(d.lower + 0.2 * (d.upper - d.lower)))
}

fn random_value(d: &ParamDescriptor, rng: &mut StreamRng) -> f64 {
    let hi = soft_upper(d);
    let v = if hi > d.lower { rng.random_range(d.lower..=hi) } else { d.lower };
    if d.integer {
        v.round()
    } else {
        v
    }
}

fn random_leaf(kind: NodeKind, domain: Domain, exclude: Option<&str>, rng: &mut StreamRng, b: &mut GraphBuilder) -> GraphNode {
    let options: Vec<_> = catalog_primitives(domain)
        .into_iter()
        .filter(|p| p.kind == kind && p.name != "identity" && Some(p.name) != exclude)
        .collect();
    let desc = *options.choose(rng).expect("catalog has alternatives");
    let values: Vec<(&str, f64)> = desc.params.iter().map(|d| (d.name, random_value(d, rng))).collect();
    b.primitive(kind, desc.name, &values)
}

fn leaf_paths(node: &GraphNode, pred: &dyn Fn(&GraphNode) -> bool, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if pred(node) {
        out.push(path.clone());
    }
    for (i, c) in node.children().iter().enumerate() {
        path.push(i);
        leaf_paths(c, pred, path, out);
        path.pop();
    }
}

fn paths_where(root: &GraphNode, pred: &dyn Fn(&GraphNode) -> bool) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    leaf_paths(root, pred, &mut Vec::new(), &mut out);
    out
}

fn node_at_mut<'a>(root: &'a mut GraphNode, path: &[usize]) -> &'a mut GraphNode {
    path.iter().fold(root, |n, &i| &mut n.children_mut()[i])
}

fn is_kind(kind: NodeKind) -> impl Fn(&GraphNode) -> bool {
    move |n| matches!(n, GraphNode::Primitive(p) if p.kind == kind)
}

/// Copies a subtree into `b`, renaming every parameter it references.
fn import(node: &GraphNode, src: &BTreeMap<String, f64>, b: &mut GraphBuilder) -> GraphNode {
    let rename = |name: &String, b: &mut GraphBuilder| b.param(name, src.get(name).copied().unwrap_or(0.0));
    match node {
        GraphNode::Primitive(p) => {
            let mut q = p.clone();
            for v in q.bindings.values_mut() {
                *v = rename(v, b);
            }
            GraphNode::Primitive(q)
        }
        GraphNode::Sequence(c) => GraphNode::Sequence(c.iter().map(|n| import(n, src, b)).collect()),
        GraphNode::Choice { weights, children } => GraphNode::Choice {
            weights: weights.iter().map(|w| rename(w, b)).collect(),
            children: children.iter().map(|n| import(n, src, b)).collect(),
        },
        GraphNode::Gate { bindings, children } => GraphNode::Gate {
            bindings: bindings.iter().map(|(s, v)| (s.clone(), rename(v, b))).collect(),
            children: children.iter().map(|n| import(n, src, b)).collect(),
        },
    }
}

/// Every referenced parameter with the descriptor bounding it.
fn bounded_params(root: &GraphNode) -> Vec<(String, ParamDescriptor)> {
    let mut out = Vec::new();
    let gate = find_primitive(NodeKind::Gate, "gate").expect("catalog gate");
    root.walk(&mut |n| match n {
        GraphNode::Primitive(p) => {
            for (slot, name) in &p.bindings {
                if let Some(d) = p.descriptor().param(slot) {
                    out.push((name.clone(), *d));
                }
            }
        }
        GraphNode::Gate { bindings, .. } => {
            for (slot, name) in bindings {
                if let Some(d) = gate.param(slot) {
                    out.push((name.clone(), *d));
                }
            }
        }
        GraphNode::Choice { weights, .. } => out.extend(weights.iter().map(|w| (w.clone(), WEIGHT_BOUNDS))),
        GraphNode::Sequence(_) => {}
    });
    out
}

fn prune(root: &GraphNode, params: BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let used: Vec<String> = root.references().into_iter().map(|(_, n)| n).collect();
    params.into_iter().filter(|(k, _)| used.contains(k)).collect()
}

fn perturb(parent: &OperatorSpec, rng: &mut StreamRng) -> (String, BTreeMap<String, f64>, GraphNode) {
    let mut params = parent.params.clone();
    let candidates = bounded_params(&parent.graph.root);
    let mut touched = Vec::new();
    if !candidates.is_empty() {
        let count = rng.random_range(1..=2.min(candidates.len()));
        for _ in 0..count {
            let (name, d) = &candidates[rng.random_range(0..candidates.len())];
            let span = 0.15 * (soft_upper(d) - d.lower).max(if d.integer { 2.0 } else { 0.05 });
            let old = params.get(name).copied().unwrap_or(d.default);
            let mut v = (old + rng.random_range(-span..=span)).clamp(d.lower, d.upper);
            if d.integer {
                v = v.round();
            }
            params.insert(name.clone(), v);
            touched.push(name.clone());
        }
    }
    touched.dedup();
    (
        format!("retuned {} of {}", touched.join(", "), parent.id),
        params,
        parent.graph.root.clone(),
    )
}

fn swap_primitive(domain: Domain, parent: &OperatorSpec, rng: &mut StreamRng) -> Option<(String, BTreeMap<String, f64>, GraphNode)> {
    let swappable = |n: &GraphNode| match n {
        GraphNode::Primitive(p) => catalog_primitives(domain)
            .iter()
            .filter(|d| d.kind == p.kind && d.name != "identity")
            .count()
            > 1,
        _ => false,
    };
    let paths = paths_where(&parent.graph.root, &swappable);
    let path = paths.choose(rng)?;
    let mut root = parent.graph.root.clone();
    let mut b = GraphBuilder::with_params(parent.params.clone());
    let target = node_at_mut(&mut root, path);
    let GraphNode::Primitive(old) = target.clone() else { return None };
    *target = random_leaf(old.kind, domain, Some(&old.name), rng, &mut b);
    let new_label = target.label();
    let params = prune(&root, b.into_params());
    Some((format!("replaced {}:{} with {new_label} in {}", old.kind, old.name, parent.id), params, root))
}

fn gate_mutation(domain: Domain, parent: &OperatorSpec, rng: &mut StreamRng) -> Option<(String, BTreeMap<String, f64>, GraphNode)> {
    let paths = paths_where(&parent.graph.root, &is_kind(NodeKind::Mutation));
    let path = paths.choose(rng)?;
    let mut root = parent.graph.root.clone();
    let mut b = GraphBuilder::with_params(parent.params.clone());
    let target = node_at_mut(&mut root, path);
    let GraphNode::Primitive(old) = target.clone() else { return None };
    let strong = random_leaf(NodeKind::Mutation, domain, None, rng, &mut b);
    let threshold = rng.random_range(0.03..=0.3);
    *target = b.gate(threshold, strong, target.clone());
    let params = prune(&root, b.into_params());
    Some((format!("gated mutation:{} on diversity in {}", old.name, parent.id), params, root))
}

fn explore(domain: Domain, rng: &mut StreamRng) -> (String, BTreeMap<String, f64>, GraphNode) {
    let mut b = GraphBuilder::new();
    let mut nodes = vec![random_leaf(NodeKind::Selection, domain, None, rng, &mut b)];
    if rng.random_bool(0.3) {
        let x = random_leaf(NodeKind::Crossover, domain, None, rng, &mut b);
        let y = random_leaf(NodeKind::Crossover, domain, None, rng, &mut b);
        let (wx, wy) = (rng.random_range(0.2..=1.0), rng.random_range(0.2..=1.0));
        nodes.push(b.choice(vec![(wx, x), (wy, y)]));
    } else {
        nodes.push(random_leaf(NodeKind::Crossover, domain, None, rng, &mut b));
    }
    if rng.random_bool(0.3) {
        let low = random_leaf(NodeKind::Mutation, domain, None, rng, &mut b);
        let high = random_leaf(NodeKind::Mutation, domain, None, rng, &mut b);
        let t = rng.random_range(0.03..=0.3);
        nodes.push(b.gate(t, low, high));
    } else {
        nodes.push(random_leaf(NodeKind::Mutation, domain, None, rng, &mut b));
    }
    if domain == Domain::Jssp {
        nodes.push(random_leaf(NodeKind::LocalSearch, domain, None, rng, &mut b));
    }
    let root = GraphNode::Sequence(nodes);
    let labels: Vec<String> = root
        .children()
        .iter()
        .map(|n| match n {
            GraphNode::Primitive(p) => p.name.clone(),
            other => other.kind().to_string(),
        })
        .collect();
    (format!("fresh graph {}", labels.join(" + ")), b.into_params(), root)
}

fn combine(a: &OperatorSpec, other: &OperatorSpec, rng: &mut StreamRng) -> Option<(String, BTreeMap<String, f64>, GraphNode)> {
    let mut root = a.graph.root.clone();
    let mut b = GraphBuilder::with_params(a.params.clone());

    // Merge the crossovers into a choice when they differ.
    let xa = paths_where(&root, &is_kind(NodeKind::Crossover));
    let xb = paths_where(&other.graph.root, &is_kind(NodeKind::Crossover));
    if rng.random_bool(0.5) && !xa.is_empty() && !xb.is_empty() {
        let pa = xa.choose(rng)?.clone();
        let pb = xb.choose(rng)?;
        let mut src = other.graph.root.clone();
        let donor = node_at_mut(&mut src, pb).clone();
        let target = node_at_mut(&mut root, &pa);
        if target.label() != donor.label() {
            let imported = import(&donor, &other.params, &mut b);
            let label = imported.label();
            let w = rng.random_range(0.3..=0.7);
            *target = b.choice(vec![(w, target.clone()), (1.0 - w, imported)]);
            let params = prune(&root, b.into_params());
            return Some((format!("{} with a choice against {label} from {}", a.id, other.id), params, root));
        }
    }

    // Transplant one non-selection primitive from the other parent.
    let donors = paths_where(&other.graph.root, &|n| {
        matches!(n, GraphNode::Primitive(p) if p.kind != NodeKind::Selection)
    });
    let pb = donors.choose(rng)?;
    let mut src = other.graph.root.clone();
    let donor = node_at_mut(&mut src, pb).clone();
    let kind = donor.kind();
    let imported = import(&donor, &other.params, &mut b);
    let label = imported.label();
    let slots = paths_where(&root, &is_kind(kind));
    match slots.choose(rng) {
        Some(pa) => *node_at_mut(&mut root, pa) = imported,
        None => match &mut root {
            GraphNode::Sequence(c) => c.push(imported),
            other_root => *other_root = GraphNode::Sequence(vec![other_root.clone(), imported]),
        },
    }
    let params = prune(&root, b.into_params());
    Some((format!("{} with {label} transplanted from {}", a.id, other.id), params, root))
}

fn generate(
    domain: Domain,
    mode: Option<ReasoningMode>,
    parents: &[OperatorSpec],
    rng: &mut StreamRng,
) -> (String, BTreeMap<String, f64>, GraphNode) {
    let fallback_parent;
    let first = match parents.first() {
        Some(p) => p,
        None => {
            fallback_parent = seed_spec(domain);
            &fallback_parent
        }
    };
    let attempt = match mode {
        Some(ReasoningMode::Combine) if parents.len() >= 2 => combine(&parents[0], &parents[1], rng),
        Some(ReasoningMode::Explore) | None => Some(explore(domain, rng)),
        _ => match rng.random_range(0..3) {
            0 => Some(perturb(first, rng)),
            1 => swap_primitive(domain, first, rng),
            _ => gate_mutation(domain, first, rng),
        },
    };
    let (what, params, root) = attempt
        .filter(|(_, params, root)| {
            let probe = OperatorSpec {
                params: params.clone(),
                graph: crate::dsl::OperatorGraph::new(root.clone()),
                ..first.clone()
            };
            validate_spec(&probe.serialize(), domain).is_ok()
        })
        .unwrap_or_else(|| perturb(first, rng));
    let mode_name = mode.map(|m| m.as_str()).unwrap_or("initialize");
    (format!("Scripted {mode_name}: {what}\nGenerated by the scripted controller."), params, root)
}
