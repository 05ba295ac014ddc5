//! The closed primitive set operator graphs are built from.

use std::fmt;

use serde::Serialize;

use crate::problem::Domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Selection,
    Crossover,
    Mutation,
    LocalSearch,
    Sequence,
    Choice,
    Gate,
}

impl NodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Selection => "selection",
            NodeKind::Crossover => "crossover",
            NodeKind::Mutation => "mutation",
            NodeKind::LocalSearch => "local_search",
            NodeKind::Sequence => "sequence",
            NodeKind::Choice => "choice",
            NodeKind::Gate => "gate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "selection" => NodeKind::Selection,
            "crossover" => NodeKind::Crossover,
            "mutation" => NodeKind::Mutation,
            "local_search" => NodeKind::LocalSearch,
            "sequence" => NodeKind::Sequence,
            "choice" => NodeKind::Choice,
            "gate" => NodeKind::Gate,
            _ => return None,
        })
    }

    pub fn is_combinator(&self) -> bool {
        matches!(self, NodeKind::Sequence | NodeKind::Choice | NodeKind::Gate)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParamDescriptor {
    pub name: &'static str,
    pub lower: f64,
    pub upper: f64,
    pub default: f64,
    pub integer: bool,
    pub doc: &'static str,
}

impl ParamDescriptor {
    const fn real(name: &'static str, lower: f64, upper: f64, default: f64, doc: &'static str) -> Self {
        Self { name, lower, upper, default, integer: false, doc }
    }

    const fn int(name: &'static str, lower: f64, upper: f64, default: f64, doc: &'static str) -> Self {
        Self { name, lower, upper, default, integer: true, doc }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrimitiveDescriptor {
    pub kind: NodeKind,
    pub name: &'static str,
    pub params: &'static [ParamDescriptor],
    pub domains: &'static [Domain],
    pub summary: &'static str,
}

impl PrimitiveDescriptor {
    pub fn param(&self, slot: &str) -> Option<&'static ParamDescriptor> {
        self.params.iter().find(|p| p.name == slot)
    }

    pub fn supports(&self, domain: Domain) -> bool {
        self.domains.contains(&domain)
    }
}

const ALL: &[Domain] = &[Domain::Jssp, Domain::Tsp, Domain::Cvrp];
const JSSP: &[Domain] = &[Domain::Jssp];

const RATE: ParamDescriptor = ParamDescriptor::real("rate", 0.0, 1.0, 0.9, "probability the operator fires");
const MUT_RATE: ParamDescriptor = ParamDescriptor::real("rate", 0.0, 1.0, 0.2, "probability the operator fires");

/// Bounds of an (un-normalized) probabilistic-choice weight.
pub const WEIGHT_BOUNDS: ParamDescriptor =
    ParamDescriptor::real("weight", 0.0, 100.0, 1.0, "relative branch weight, normalized on validation");

/// Default threshold of the diversity gate.
pub const DEFAULT_DIVERSITY_THRESHOLD: f64 = 0.0917;

pub static CATALOG: &[PrimitiveDescriptor] = &[
    PrimitiveDescriptor {
        kind: NodeKind::Selection,
        name: "tournament",
        params: &[ParamDescriptor::int("size", 2.0, 10.0, 3.0, "contestants per tournament")],
        domains: ALL,
        summary: "best of `size` uniformly drawn members",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Selection,
        name: "rank",
        params: &[ParamDescriptor::real("pressure", 1.0, 2.0, 1.5, "linear ranking pressure")],
        domains: ALL,
        summary: "linear ranking selection; the best member is drawn `pressure`/N of the time",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Selection,
        name: "diversity_fitness",
        params: &[
            ParamDescriptor::int("pool", 2.0, 20.0, 6.0, "candidates drawn per selection"),
            ParamDescriptor::real("keep", 0.1, 1.0, 0.5, "fraction of the pool kept by distance to the best"),
        ],
        domains: ALL,
        summary: "filter a random pool by distance to the incumbent best, then take the fittest survivor",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Crossover,
        name: "identity",
        params: &[],
        domains: ALL,
        summary: "child is a copy of the first parent",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Crossover,
        name: "order",
        params: &[RATE],
        domains: ALL,
        summary: "order crossover (OX): keep a slice of parent 1, fill the rest in parent 2 order from the cut",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Crossover,
        name: "one_point",
        params: &[RATE],
        domains: ALL,
        summary: "prefix of parent 1, remainder in parent 2 order",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Crossover,
        name: "two_point",
        params: &[RATE],
        domains: ALL,
        summary: "keep a slice of parent 1 in place, fill the other positions left to right in parent 2 order",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Crossover,
        name: "uniform_precedence",
        params: &[
            RATE,
            ParamDescriptor::real("bias", 0.0, 1.0, 0.5, "probability of drawing the next gene from parent 1"),
        ],
        domains: JSSP,
        summary: "precedence-preserving uniform crossover on operation sequences",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Mutation,
        name: "swap",
        params: &[MUT_RATE],
        domains: ALL,
        summary: "exchange two positions",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Mutation,
        name: "multi_swap",
        params: &[MUT_RATE, ParamDescriptor::int("k", 1.0, 10.0, 3.0, "swaps per application")],
        domains: ALL,
        summary: "`k` independent swaps",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Mutation,
        name: "inversion",
        params: &[MUT_RATE],
        domains: ALL,
        summary: "reverse a random segment",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Mutation,
        name: "insertion",
        params: &[MUT_RATE],
        domains: ALL,
        summary: "move one element to another position",
    },
    PrimitiveDescriptor {
        kind: NodeKind::LocalSearch,
        name: "swap_hill_climb",
        params: &[
            ParamDescriptor::int("iterations", 1.0, 500.0, 20.0, "sampled swap moves per child"),
            ParamDescriptor::int("tenure", 0.0, 50.0, 0.0, "tabu tenure of accepted moves (0 disables)"),
        ],
        domains: JSSP,
        summary: "first-improvement hill climb over random swap moves with optional tabu list",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Sequence,
        name: "sequence",
        params: &[],
        domains: ALL,
        summary: "run children in order",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Choice,
        name: "choice",
        params: &[],
        domains: ALL,
        summary: "run one child drawn with the normalized `weights`",
    },
    PrimitiveDescriptor {
        kind: NodeKind::Gate,
        name: "gate",
        params: &[
            ParamDescriptor::real(
                "threshold",
                0.0,
                1.0,
                DEFAULT_DIVERSITY_THRESHOLD,
                "population diversity below which the first child runs",
            ),
            ParamDescriptor::real("lambda", 0.0, 1.0, 0.0, "diversity weight; widens the threshold by (1 + lambda)"),
        ],
        domains: ALL,
        summary: "run child 0 when diversity < threshold * (1 + lambda), else child 1",
    },
];

pub fn find_primitive(kind: NodeKind, name: &str) -> Option<&'static PrimitiveDescriptor> {
    CATALOG.iter().find(|p| p.kind == kind && p.name == name)
}

/// Primitives usable in graphs for `domain`.
pub fn catalog_primitives(domain: Domain) -> Vec<&'static PrimitiveDescriptor> {
    CATALOG.iter().filter(|p| p.supports(domain)).collect()
}

/// Grammar summary embedded into coding prompts.
pub fn grammar_reference(domain: Domain) -> String {
    let mut out = String::new();
    out.push_str("Graph nodes are JSON objects with a \"kind\" field.\n");
    out.push_str("Primitive nodes: {\"kind\": K, \"primitive\": NAME, \"params\": {SLOT: PARAMETER_NAME}}\n");
    out.push_str("Sequence: {\"kind\": \"sequence\", \"children\": [...]}\n");
    out.push_str("Choice: {\"kind\": \"choice\", \"weights\": [PARAMETER_NAME, ...], \"children\": [...]}\n");
    out.push_str(
        "Gate: {\"kind\": \"gate\", \"params\": {\"threshold\": PARAMETER_NAME}, \"children\": [low_diversity, high_diversity]}\n",
    );
    out.push_str("Rules: exactly one selection node, not nested under choice or gate; depth <= 8; at most 64 nodes.\n");
    out.push_str("Every PARAMETER_NAME must be defined in the parameter section.\n");
    out.push_str("Available primitives:\n");
    for p in catalog_primitives(domain) {
        if p.kind.is_combinator() {
            continue;
        }
        out.push_str(&format!("- {} {}: {}", p.kind, p.name, p.summary));
        if !p.params.is_empty() {
            let slots: Vec<String> = p
                .params
                .iter()
                .map(|d| {
                    format!(
                        "{}{} in [{}, {}] default {}",
                        d.name,
                        if d.integer { " (integer)" } else { "" },
                        d.lower,
                        d.upper,
                        d.default
                    )
                })
                .collect();
            out.push_str(&format!("; slots: {}", slots.join(", ")));
        }
        out.push('\n');
    }
    out
}
