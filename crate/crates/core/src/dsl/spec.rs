use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use super::catalog::{find_primitive, NodeKind, PrimitiveDescriptor};
use crate::problem::Domain;

/// Current version of the spec document format.
pub const SPEC_FORMAT_VERSION: u64 = 1;

/// Identifier of an operator spec, rendered `S<n>`. `S0` means unassigned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SpecId(pub u64);

impl fmt::Display for SpecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

impl FromStr for SpecId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('S')
            .and_then(|n| n.parse().ok())
            .map(SpecId)
            .ok_or_else(|| format!("invalid spec id {s:?}"))
    }
}

impl Serialize for SpecId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SpecId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How a spec was produced by the meta-controller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningMode {
    Combine,
    Mutate,
    Explore,
}

impl ReasoningMode {
    pub const ALL: [ReasoningMode; 3] = [ReasoningMode::Combine, ReasoningMode::Mutate, ReasoningMode::Explore];

    pub fn as_str(&self) -> &'static str {
        match self {
            ReasoningMode::Combine => "combine",
            ReasoningMode::Mutate => "mutate",
            ReasoningMode::Explore => "explore",
        }
    }
}

impl fmt::Display for ReasoningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Lineage {
    #[serde(default)]
    pub parents: Vec<SpecId>,
    /// `None` for catalog seeds.
    #[serde(default)]
    pub mode: Option<ReasoningMode>,
}

/// A primitive leaf with its slot → parameter-name bindings.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveNode {
    pub kind: NodeKind,
    pub name: String,
    pub bindings: BTreeMap<String, String>,
}

impl PrimitiveNode {
    pub fn descriptor(&self) -> &'static PrimitiveDescriptor {
        find_primitive(self.kind, &self.name).expect("validated primitive")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GraphNode {
    Primitive(PrimitiveNode),
    Sequence(Vec<GraphNode>),
    /// One child per weight parameter.
    Choice {
        weights: Vec<String>,
        children: Vec<GraphNode>,
    },
    /// `children[0]` runs below the diversity threshold, `children[1]` otherwise.
    Gate {
        bindings: BTreeMap<String, String>,
        children: Vec<GraphNode>,
    },
}

impl GraphNode {
    pub fn primitive(kind: NodeKind, name: &str, bindings: &[(&str, &str)]) -> Self {
        GraphNode::Primitive(PrimitiveNode {
            kind,
            name: name.to_string(),
            bindings: bindings
                .iter()
                .map(|(s, p)| (s.to_string(), p.to_string()))
                .collect(),
        })
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            GraphNode::Primitive(p) => p.kind,
            GraphNode::Sequence(_) => NodeKind::Sequence,
            GraphNode::Choice { .. } => NodeKind::Choice,
            GraphNode::Gate { .. } => NodeKind::Gate,
        }
    }

    pub fn children(&self) -> &[GraphNode] {
        match self {
            GraphNode::Primitive(_) => &[],
            GraphNode::Sequence(c) => c,
            GraphNode::Choice { children, .. } | GraphNode::Gate { children, .. } => children,
        }
    }

    pub fn children_mut(&mut self) -> &mut [GraphNode] {
        match self {
            GraphNode::Primitive(_) => &mut [],
            GraphNode::Sequence(c) => c,
            GraphNode::Choice { children, .. } | GraphNode::Gate { children, .. } => children,
        }
    }

    /// Tree-edit label: `kind:primitive` for leaves, the kind for combinators.
    pub fn label(&self) -> String {
        match self {
            GraphNode::Primitive(p) => format!("{}:{}", p.kind, p.name),
            other => other.kind().to_string(),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(GraphNode::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(GraphNode::depth).max().unwrap_or(0)
    }

    /// Pre-order walk.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a GraphNode)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Every parameter name this subtree references, with the slot it binds.
    pub fn references(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        self.walk(&mut |n| match n {
            GraphNode::Primitive(p) => out.extend(p.bindings.iter().map(|(s, v)| (s.clone(), v.clone()))),
            GraphNode::Gate { bindings, .. } => out.extend(bindings.iter().map(|(s, v)| (s.clone(), v.clone()))),
            GraphNode::Choice { weights, .. } => out.extend(weights.iter().map(|w| ("weight".to_string(), w.clone()))),
            GraphNode::Sequence(_) => {}
        });
        out
    }

    pub fn to_json(&self) -> Value {
        match self {
            GraphNode::Primitive(p) => {
                let mut m = Map::new();
                m.insert("kind".into(), json!(p.kind.as_str()));
                m.insert("primitive".into(), json!(p.name));
                if !p.bindings.is_empty() {
                    m.insert("params".into(), json!(p.bindings));
                }
                Value::Object(m)
            }
            GraphNode::Sequence(children) => json!({
                "kind": "sequence",
                "children": children.iter().map(GraphNode::to_json).collect::<Vec<_>>(),
            }),
            GraphNode::Choice { weights, children } => json!({
                "kind": "choice",
                "weights": weights,
                "children": children.iter().map(GraphNode::to_json).collect::<Vec<_>>(),
            }),
            GraphNode::Gate { bindings, children } => json!({
                "kind": "gate",
                "params": bindings,
                "children": children.iter().map(GraphNode::to_json).collect::<Vec<_>>(),
            }),
        }
    }
}

/// The executable part of a spec: a tree of operator nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorGraph {
    pub root: GraphNode,
}

impl OperatorGraph {
    pub fn new(root: GraphNode) -> Self {
        Self { root }
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// First leaf of the given kind in pre-order.
    pub fn find_kind(&self, kind: NodeKind) -> Option<&PrimitiveNode> {
        let mut found = None;
        self.root.walk(&mut |n| {
            if let GraphNode::Primitive(p) = n {
                if p.kind == kind && found.is_none() {
                    found = Some(p);
                }
            }
        });
        found
    }
}

/// An evolved algorithm: description, operator graph and hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSpec {
    pub id: SpecId,
    pub domain: Domain,
    pub description: String,
    pub params: BTreeMap<String, f64>,
    pub graph: OperatorGraph,
    pub lineage: Lineage,
}

impl OperatorSpec {
    /// First line of the description.
    pub fn title(&self) -> &str {
        self.description.lines().next().unwrap_or("").trim()
    }

    pub fn to_document(&self) -> Value {
        json!({
            "version": SPEC_FORMAT_VERSION,
            "id": self.id,
            "domain": self.domain,
            "description": self.description,
            "parameters": self.params,
            "graph": self.graph.root.to_json(),
            "lineage": self.lineage,
        })
    }

    /// Compact JSON document accepted by [`super::validate_spec`].
    pub fn serialize(&self) -> String {
        self.to_document().to_string()
    }

    pub fn serialize_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("json values serialize")
    }
}

impl Serialize for OperatorSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_document().serialize(s)
    }
}
