//! Schema, domain and bounds checks for spec documents.
//!
//! Validation collects every violation it can find instead of stopping at the
//! first one, so a retry prompt can list them all.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer};
use serde_json::Value;

use super::catalog::{find_primitive, NodeKind, ParamDescriptor, WEIGHT_BOUNDS};
use super::spec::*;
use crate::problem::Domain;

pub const MAX_DEPTH: usize = 8;
pub const MAX_NODES: usize = 64;

/// Values at most this fraction of the bound range outside a bound are clamped.
pub const CLAMP_TOLERANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub enum SpecViolation {
    Malformed(String),
    UnsupportedVersion(u64),
    DomainMismatch { expected: Domain, found: String },
    UnknownKind { path: String, kind: String },
    UnknownPrimitive { path: String, kind: NodeKind, name: String },
    UnknownSlot { path: String, primitive: String, slot: String },
    MissingParameter(String),
    OutOfBounds { param: String, value: f64, lower: f64, upper: f64 },
    DomainSchema { path: String, detail: String },
    SelectionCount(usize),
    SelectionNested(String),
    Arity { path: String, detail: String },
    InvalidWeights(String),
    DepthExceeded(usize),
    SizeExceeded(usize),
}

impl fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SpecViolation::*;
        match self {
            Malformed(m) => write!(f, "malformed document: {m}"),
            UnsupportedVersion(v) => write!(f, "unsupported document version {v}"),
            DomainMismatch { expected, found } => {
                write!(f, "document domain {found:?} does not match {expected}")
            }
            UnknownKind { path, kind } => write!(f, "{path}: unknown node kind {kind:?}"),
            UnknownPrimitive { path, kind, name } => {
                write!(f, "{path}: unknown primitive {name:?} for kind {kind}")
            }
            UnknownSlot { path, primitive, slot } => {
                write!(f, "{path}: primitive {primitive} has no parameter slot {slot:?}")
            }
            MissingParameter(p) => write!(f, "missing parameter {p}"),
            OutOfBounds { param, value, lower, upper } => {
                write!(f, "parameter {param} = {value} out of bounds [{lower}, {upper}]")
            }
            DomainSchema { path, detail } => write!(f, "domain schema violation at {path}: {detail}"),
            SelectionCount(n) => write!(f, "graph must contain exactly one selection node, found {n}"),
            SelectionNested(path) => {
                write!(f, "{path}: selection node must not be nested under choice or gate")
            }
            Arity { path, detail } => write!(f, "{path}: {detail}"),
            InvalidWeights(m) => write!(f, "invalid choice weights: {m}"),
            DepthExceeded(d) => write!(f, "graph depth {d} exceeds {MAX_DEPTH}"),
            SizeExceeded(n) => write!(f, "graph has {n} nodes, more than {MAX_NODES}"),
        }
    }
}

impl std::error::Error for SpecViolation {}

/// Parses and validates a serialized spec for `domain`.
pub fn validate_spec(document: &str, domain: Domain) -> Result<OperatorSpec, Vec<SpecViolation>> {
    let value: Value = serde_json::from_str(document)
        .map_err(|e| vec![SpecViolation::Malformed(e.to_string())])?;
    validate_value(&value, domain)
}

/// Validates an already-parsed document.
pub fn validate_value(doc: &Value, domain: Domain) -> Result<OperatorSpec, Vec<SpecViolation>> {
    let mut errs = Vec::new();
    let Some(obj) = doc.as_object() else {
        return Err(vec![SpecViolation::Malformed("document must be a JSON object".into())]);
    };

    if let Some(v) = obj.get("version") {
        match v.as_u64() {
            Some(SPEC_FORMAT_VERSION) => {}
            Some(other) => errs.push(SpecViolation::UnsupportedVersion(other)),
            None => errs.push(SpecViolation::Malformed("version must be an integer".into())),
        }
    }
    if let Some(d) = obj.get("domain") {
        match d.as_str() {
            Some(s) if s.eq_ignore_ascii_case(domain.as_str()) => {}
            _ => errs.push(SpecViolation::DomainMismatch {
                expected: domain,
                found: d.to_string(),
            }),
        }
    }
    let id = match obj.get("id") {
        None | Some(Value::Null) => SpecId::default(),
        Some(v) => match v.as_str().map(str::parse::<SpecId>) {
            Some(Ok(id)) => id,
            _ => {
                errs.push(SpecViolation::Malformed(format!("invalid id {v}")));
                SpecId::default()
            }
        },
    };
    let description = match obj.get("description") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            errs.push(SpecViolation::Malformed("description must be a string".into()));
            String::new()
        }
    };
    let lineage = match obj.get("lineage") {
        None | Some(Value::Null) => Lineage::default(),
        Some(v) => serde_json::from_value(v.clone()).unwrap_or_else(|e| {
            errs.push(SpecViolation::Malformed(format!("lineage: {e}")));
            Lineage::default()
        }),
    };

    let mut params = BTreeMap::new();
    match obj.get("parameters") {
        None | Some(Value::Null) => {}
        Some(Value::Object(m)) => {
            for (k, v) in m {
                match v.as_f64() {
                    Some(x) if x.is_finite() => {
                        params.insert(k.clone(), x);
                    }
                    _ => errs.push(SpecViolation::Malformed(format!("parameter {k} is not a finite number"))),
                }
            }
        }
        Some(_) => errs.push(SpecViolation::Malformed("parameters must be an object".into())),
    }

    let root = match obj.get("graph") {
        Some(g) => parse_node(g, "graph", &mut errs),
        None => {
            errs.push(SpecViolation::Malformed("missing graph".into()));
            None
        }
    };

    let Some(root) = root else {
        return Err(errs);
    };
    let graph = OperatorGraph::new(root);
    check_structure(&graph, domain, &mut errs);
    check_parameters(&graph, &mut params, &mut errs);

    if errs.is_empty() {
        Ok(OperatorSpec {
            id,
            domain,
            description,
            params,
            graph,
            lineage,
        })
    } else {
        Err(errs)
    }
}

fn string_map(v: Option<&Value>, path: &str, errs: &mut Vec<SpecViolation>) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    match v {
        None | Some(Value::Null) => {}
        Some(Value::Object(m)) => {
            for (slot, p) in m {
                match p.as_str() {
                    Some(name) => {
                        out.insert(slot.clone(), name.to_string());
                    }
                    None => errs.push(SpecViolation::Malformed(format!(
                        "{path}: slot {slot} must reference a parameter by name"
                    ))),
                }
            }
        }
        Some(_) => errs.push(SpecViolation::Malformed(format!("{path}: params must be an object"))),
    }
    out
}

fn parse_children(v: &Value, path: &str, errs: &mut Vec<SpecViolation>) -> Option<Vec<GraphNode>> {
    let Some(arr) = v.get("children").and_then(Value::as_array) else {
        errs.push(SpecViolation::Arity {
            path: path.into(),
            detail: "combinator needs a children array".into(),
        });
        return None;
    };
    let mut out = Vec::with_capacity(arr.len());
    let mut ok = true;
    for (i, c) in arr.iter().enumerate() {
        match parse_node(c, &format!("{path}.children[{i}]"), errs) {
            Some(n) => out.push(n),
            None => ok = false,
        }
    }
    ok.then_some(out)
}

fn parse_node(v: &Value, path: &str, errs: &mut Vec<SpecViolation>) -> Option<GraphNode> {
    let Some(obj) = v.as_object() else {
        errs.push(SpecViolation::Malformed(format!("{path}: node must be an object")));
        return None;
    };
    let Some(kind_str) = obj.get("kind").and_then(Value::as_str) else {
        errs.push(SpecViolation::Malformed(format!("{path}: node needs a string kind")));
        return None;
    };
    let Some(kind) = NodeKind::parse(kind_str) else {
        errs.push(SpecViolation::UnknownKind {
            path: path.into(),
            kind: kind_str.into(),
        });
        return None;
    };
    match kind {
        NodeKind::Sequence => {
            let children = parse_children(v, path, errs)?;
            if children.is_empty() {
                errs.push(SpecViolation::Arity {
                    path: path.into(),
                    detail: "sequence needs at least one child".into(),
                });
            }
            Some(GraphNode::Sequence(children))
        }
        NodeKind::Choice => {
            let weights: Vec<String> = match obj.get("weights").and_then(Value::as_array) {
                Some(ws) => ws
                    .iter()
                    .filter_map(|w| {
                        let s = w.as_str().map(str::to_string);
                        if s.is_none() {
                            errs.push(SpecViolation::Malformed(format!(
                                "{path}: weights must be parameter names"
                            )));
                        }
                        s
                    })
                    .collect(),
                None => {
                    errs.push(SpecViolation::Arity {
                        path: path.into(),
                        detail: "choice needs a weights array".into(),
                    });
                    Vec::new()
                }
            };
            let children = parse_children(v, path, errs)?;
            if children.is_empty() || weights.len() != children.len() {
                errs.push(SpecViolation::Arity {
                    path: path.into(),
                    detail: format!(
                        "choice needs one weight per child ({} weights, {} children)",
                        weights.len(),
                        children.len()
                    ),
                });
            }
            Some(GraphNode::Choice { weights, children })
        }
        NodeKind::Gate => {
            let bindings = string_map(obj.get("params"), path, errs);
            let gate = find_primitive(NodeKind::Gate, "gate").expect("catalog gate");
            for slot in bindings.keys() {
                if gate.param(slot).is_none() {
                    errs.push(SpecViolation::UnknownSlot {
                        path: path.into(),
                        primitive: "gate".into(),
                        slot: slot.clone(),
                    });
                }
            }
            let children = parse_children(v, path, errs)?;
            if children.len() != 2 {
                errs.push(SpecViolation::Arity {
                    path: path.into(),
                    detail: format!("gate needs exactly 2 children, found {}", children.len()),
                });
            }
            Some(GraphNode::Gate { bindings, children })
        }
        _ => {
            let Some(name) = obj.get("primitive").and_then(Value::as_str) else {
                errs.push(SpecViolation::Malformed(format!("{path}: {kind} node needs a primitive name")));
                return None;
            };
            let bindings = string_map(obj.get("params"), path, errs);
            match find_primitive(kind, name) {
                Some(desc) => {
                    for slot in bindings.keys() {
                        if desc.param(slot).is_none() {
                            errs.push(SpecViolation::UnknownSlot {
                                path: path.into(),
                                primitive: name.into(),
                                slot: slot.clone(),
                            });
                        }
                    }
                }
                None => {
                    errs.push(SpecViolation::UnknownPrimitive {
                        path: path.into(),
                        kind,
                        name: name.into(),
                    });
                    return None;
                }
            }
            if obj.get("children").is_some() {
                errs.push(SpecViolation::Arity {
                    path: path.into(),
                    detail: "primitive nodes are leaves".into(),
                });
            }
            Some(GraphNode::Primitive(PrimitiveNode {
                kind,
                name: name.into(),
                bindings,
            }))
        }
    }
}

fn check_structure(graph: &OperatorGraph, domain: Domain, errs: &mut Vec<SpecViolation>) {
    let depth = graph.depth();
    if depth > MAX_DEPTH {
        errs.push(SpecViolation::DepthExceeded(depth));
    }
    let size = graph.node_count();
    if size > MAX_NODES {
        errs.push(SpecViolation::SizeExceeded(size));
    }

    let mut selections = 0;
    fn visit(
        node: &GraphNode,
        path: String,
        conditional: bool,
        domain: Domain,
        selections: &mut usize,
        errs: &mut Vec<SpecViolation>,
    ) {
        if let GraphNode::Primitive(p) = node {
            if p.kind == NodeKind::Selection {
                *selections += 1;
                if conditional {
                    errs.push(SpecViolation::SelectionNested(path.clone()));
                }
            }
            if !p.descriptor().supports(domain) {
                errs.push(SpecViolation::DomainSchema {
                    path: path.clone(),
                    detail: format!("{} primitive {} is not allowed for {domain}", p.kind, p.name),
                });
            }
        }
        let conditional = conditional || matches!(node, GraphNode::Choice { .. } | GraphNode::Gate { .. });
        for (i, c) in node.children().iter().enumerate() {
            visit(c, format!("{path}.children[{i}]"), conditional, domain, selections, errs);
        }
    }
    visit(&graph.root, "graph".into(), false, domain, &mut selections, errs);
    if selections != 1 {
        errs.push(SpecViolation::SelectionCount(selections));
    }
}

/// Bounds every referenced parameter against the slots it binds, clamping
/// near misses, then normalizes choice weights in place.
fn check_parameters(graph: &OperatorGraph, params: &mut BTreeMap<String, f64>, errs: &mut Vec<SpecViolation>) {
    let mut slot_uses: BTreeMap<String, Vec<&'static ParamDescriptor>> = BTreeMap::new();
    let mut weight_groups: Vec<Vec<String>> = Vec::new();
    graph.root.walk(&mut |n| match n {
        GraphNode::Primitive(p) => {
            let desc = p.descriptor();
            for (slot, name) in &p.bindings {
                if let Some(d) = desc.param(slot) {
                    slot_uses.entry(name.clone()).or_default().push(d);
                }
            }
        }
        GraphNode::Gate { bindings, .. } => {
            let gate = find_primitive(NodeKind::Gate, "gate").expect("catalog gate");
            for (slot, name) in bindings {
                if let Some(d) = gate.param(slot) {
                    slot_uses.entry(name.clone()).or_default().push(d);
                }
            }
        }
        GraphNode::Choice { weights, .. } => weight_groups.push(weights.clone()),
        GraphNode::Sequence(_) => {}
    });

    let mut missing = BTreeSet::new();
    for (name, uses) in &slot_uses {
        let Some(value) = params.get_mut(name) else {
            missing.insert(name.clone());
            continue;
        };
        for d in uses {
            match bound(*value, d.lower, d.upper, d.integer) {
                Some(v) => *value = v,
                None => {
                    errs.push(SpecViolation::OutOfBounds {
                        param: name.clone(),
                        value: *value,
                        lower: d.lower,
                        upper: d.upper,
                    });
                    break;
                }
            }
        }
    }

    let mut weight_owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (g, group) in weight_groups.iter().enumerate() {
        for w in group {
            if slot_uses.contains_key(w) {
                errs.push(SpecViolation::InvalidWeights(format!(
                    "{w} is used both as a weight and as an operator parameter"
                )));
            }
            if let Some(prev) = weight_owner.insert(w, g) {
                if prev != g || group.iter().filter(|x| *x == w).count() > 1 {
                    errs.push(SpecViolation::InvalidWeights(format!("{w} is shared between branches")));
                }
            }
        }
    }
    for group in &weight_groups {
        let mut ok = true;
        for w in group {
            match params.get_mut(w) {
                None => {
                    missing.insert(w.clone());
                    ok = false;
                }
                Some(value) => match bound(*value, WEIGHT_BOUNDS.lower, WEIGHT_BOUNDS.upper, false) {
                    Some(v) => *value = v,
                    None => {
                        errs.push(SpecViolation::OutOfBounds {
                            param: w.clone(),
                            value: *value,
                            lower: WEIGHT_BOUNDS.lower,
                            upper: WEIGHT_BOUNDS.upper,
                        });
                        ok = false;
                    }
                },
            }
        }
        if !ok {
            continue;
        }
        let total: f64 = group.iter().map(|w| params[w]).sum();
        if total.is_nan() || total <= 0.0 {
            errs.push(SpecViolation::InvalidWeights(format!(
                "weights {} sum to zero",
                group.join(", ")
            )));
            continue;
        }
        // Already-normalized weights stay bit-identical across round trips.
        if (total - 1.0).abs() <= 1e-12 {
            continue;
        }
        for w in group {
            let v = params.get_mut(w).expect("checked");
            *v /= total;
        }
    }
    errs.extend(missing.into_iter().map(SpecViolation::MissingParameter));
}

fn bound(value: f64, lower: f64, upper: f64, integer: bool) -> Option<f64> {
    let slack = CLAMP_TOLERANCE * (upper - lower);
    if value < lower - slack || value > upper + slack {
        return None;
    }
    let mut v = value.clamp(lower, upper);
    if integer {
        v = v.round();
    }
    Some(v)
}

impl<'de> Deserialize<'de> for OperatorSpec {
    /// Reads a document that carries its own `domain` field.
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        let domain: Domain = value
            .get("domain")
            .and_then(Value::as_str)
            .ok_or_else(|| serde::de::Error::custom("spec document without domain"))?
            .parse()
            .map_err(serde::de::Error::custom)?;
        validate_value(&value, domain).map_err(|errs| {
            serde::de::Error::custom(
                errs.iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        })
    }
}
