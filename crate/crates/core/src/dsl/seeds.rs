//! Shipped seed specs and a small builder for assembling graphs.

use std::collections::BTreeMap;

use super::catalog::{find_primitive, NodeKind, DEFAULT_DIVERSITY_THRESHOLD};
use super::spec::*;
use crate::problem::Domain;

/// Assembles a graph while minting unique parameter names.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    params: BTreeMap<String, f64>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from existing parameters so new names do not collide.
    pub fn with_params(params: BTreeMap<String, f64>) -> Self {
        Self { params }
    }

    pub fn fresh_name(&self, stem: &str) -> String {
        if !self.params.contains_key(stem) {
            return stem.to_string();
        }
        (2..)
            .map(|i| format!("{stem}_{i}"))
            .find(|n| !self.params.contains_key(n))
            .expect("unbounded")
    }

    pub fn param(&mut self, stem: &str, value: f64) -> String {
        let name = self.fresh_name(stem);
        self.params.insert(name.clone(), value);
        name
    }

    /// Primitive leaf with every slot bound; unspecified slots take catalog defaults.
    pub fn primitive(&mut self, kind: NodeKind, name: &str, values: &[(&str, f64)]) -> GraphNode {
        let desc = find_primitive(kind, name).unwrap_or_else(|| panic!("unknown primitive {kind} {name}"));
        let mut bindings = BTreeMap::new();
        for d in desc.params {
            let v = values
                .iter()
                .find(|(s, _)| *s == d.name)
                .map(|(_, v)| *v)
                .unwrap_or(d.default);
            let pname = self.param(&format!("{}_{}", kind.as_str(), d.name), v);
            bindings.insert(d.name.to_string(), pname);
        }
        GraphNode::Primitive(PrimitiveNode {
            kind,
            name: name.to_string(),
            bindings,
        })
    }

    pub fn choice(&mut self, branches: Vec<(f64, GraphNode)>) -> GraphNode {
        let mut weights = Vec::new();
        let mut children = Vec::new();
        for (w, c) in branches {
            weights.push(self.param("choice_weight", w));
            children.push(c);
        }
        GraphNode::Choice { weights, children }
    }

    pub fn gate(&mut self, threshold: f64, low: GraphNode, high: GraphNode) -> GraphNode {
        let t = self.param("gate_threshold", threshold);
        GraphNode::Gate {
            bindings: BTreeMap::from([("threshold".to_string(), t)]),
            children: vec![low, high],
        }
    }

    pub fn finish(self, domain: Domain, description: &str, root: GraphNode) -> OperatorSpec {
        OperatorSpec {
            id: SpecId::default(),
            domain,
            description: description.to_string(),
            params: self.params,
            graph: OperatorGraph::new(root),
            lineage: Lineage::default(),
        }
    }

    pub fn into_params(self) -> BTreeMap<String, f64> {
        self.params
    }
}

fn with_local_search(b: &mut GraphBuilder, domain: Domain, mut nodes: Vec<GraphNode>, iterations: f64, tenure: f64) -> GraphNode {
    if domain == Domain::Jssp {
        nodes.push(b.primitive(
            NodeKind::LocalSearch,
            "swap_hill_climb",
            &[("iterations", iterations), ("tenure", tenure)],
        ));
    }
    GraphNode::Sequence(nodes)
}

/// Tournament selection, order crossover, swap mutation and, for JSSP, a
/// short swap hill climb.
pub fn seed_spec(domain: Domain) -> OperatorSpec {
    let mut b = GraphBuilder::new();
    let nodes = vec![
        b.primitive(NodeKind::Selection, "tournament", &[("size", 3.0)]),
        b.primitive(NodeKind::Crossover, "order", &[("rate", 0.9)]),
        b.primitive(NodeKind::Mutation, "swap", &[("rate", 0.2)]),
    ];
    let root = with_local_search(&mut b, domain, nodes, 10.0, 0.0);
    b.finish(
        domain,
        "Seed: tournament + order crossover + swap mutation\nBaseline genetic algorithm shipped with the catalog.",
        root,
    )
}

/// The initial algorithm population: the seed spec followed by catalog
/// variants, truncated or cycled to `count` entries.
pub fn initial_specs(domain: Domain, count: usize) -> Vec<OperatorSpec> {
    let mut out = vec![seed_spec(domain)];

    let mut b = GraphBuilder::new();
    let nodes = vec![
        b.primitive(NodeKind::Selection, "rank", &[("pressure", 1.5)]),
        b.primitive(NodeKind::Crossover, "one_point", &[("rate", 0.9)]),
        b.primitive(NodeKind::Mutation, "inversion", &[("rate", 0.2)]),
    ];
    let root = with_local_search(&mut b, domain, nodes, 10.0, 0.0);
    out.push(b.finish(
        domain,
        "Ranked one-point inversion\nLinear ranking selection with one-point crossover and segment inversion.",
        root,
    ));

    let mut b = GraphBuilder::new();
    let nodes = vec![
        b.primitive(NodeKind::Selection, "tournament", &[("size", 2.0)]),
        b.primitive(NodeKind::Crossover, "two_point", &[("rate", 0.8)]),
        b.primitive(NodeKind::Mutation, "insertion", &[("rate", 0.3)]),
    ];
    let root = with_local_search(&mut b, domain, nodes, 10.0, 0.0);
    out.push(b.finish(
        domain,
        "Binary tournament two-point insertion\nLow-pressure selection with slice-preserving crossover.",
        root,
    ));

    let mut b = GraphBuilder::new();
    let cross = if domain == Domain::Jssp {
        b.primitive(NodeKind::Crossover, "uniform_precedence", &[("rate", 0.9), ("bias", 0.5)])
    } else {
        b.primitive(NodeKind::Crossover, "order", &[("rate", 0.9)])
    };
    let nodes = vec![
        b.primitive(NodeKind::Selection, "diversity_fitness", &[("pool", 6.0), ("keep", 0.5)]),
        cross,
        b.primitive(NodeKind::Mutation, "multi_swap", &[("rate", 0.2), ("k", 3.0)]),
    ];
    let root = with_local_search(&mut b, domain, nodes, 10.0, 5.0);
    out.push(b.finish(
        domain,
        "Diversity-filtered multi-swap\nParents are filtered by distance to the incumbent before fitness ranking.",
        root,
    ));

    let mut b = GraphBuilder::new();
    let sel = b.primitive(NodeKind::Selection, "tournament", &[("size", 3.0)]);
    let ox = b.primitive(NodeKind::Crossover, "order", &[("rate", 0.9)]);
    let one = b.primitive(NodeKind::Crossover, "one_point", &[("rate", 0.9)]);
    let cross = b.choice(vec![(0.5, ox), (0.5, one)]);
    let low = b.primitive(NodeKind::Mutation, "multi_swap", &[("rate", 0.5), ("k", 3.0)]);
    let high = b.primitive(NodeKind::Mutation, "inversion", &[("rate", 0.2)]);
    let gate = b.gate(DEFAULT_DIVERSITY_THRESHOLD, low, high);
    let root = with_local_search(&mut b, domain, vec![sel, cross, gate], 10.0, 0.0);
    out.push(b.finish(
        domain,
        "Diversity-gated hybrid\nRandomly alternates order and one-point crossover; mutation strength rises when diversity collapses.",
        root,
    ));

    let base = out.len();
    (0..count).map(|i| out[i % base].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::validate_spec;

    #[test]
    fn initial_specs_validate() {
        for domain in Domain::ALL {
            for spec in initial_specs(domain, 5) {
                validate_spec(&spec.serialize(), domain)
                    .unwrap_or_else(|e| panic!("{domain}: {}: {e:?}", spec.title()));
            }
        }
    }

    #[test]
    fn fresh_names_do_not_collide() {
        let mut b = GraphBuilder::new();
        assert_eq!(b.param("x", 1.0), "x");
        assert_eq!(b.param("x", 2.0), "x_2");
        assert_eq!(b.param("x", 3.0), "x_3");
    }
}
