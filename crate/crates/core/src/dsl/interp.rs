//! Deterministic interpreter for operator graphs.
//!
//! Each child is produced independently from its own derived stream: the
//! selection node picks two parents, the child starts as a copy of the first,
//! and the remaining nodes run in tree order.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::catalog::NodeKind;
use super::spec::{GraphNode, OperatorSpec, PrimitiveNode};
use crate::engine::{population_diversity, positional_distance, Individual, Population};
use crate::problem::{Domain, ProblemInstance};
use crate::rng::{SeedStream, StreamRng};

/// Node visits allowed per child before the graph is deemed pathological.
pub const DEFAULT_NODE_CAP: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("spec is for {spec}, population is {population}")]
    DomainMismatch { spec: Domain, population: Domain },
    #[error("node evaluation cap of {0} exceeded")]
    BudgetExceeded(usize),
    #[error("parameter {0} is not defined")]
    MissingParameter(String),
    #[error("graph has no selection node")]
    NoSelection,
}

/// A child with its parent indices into the source population. When no
/// crossover fired both entries name the first parent.
#[derive(Clone, Debug, PartialEq)]
pub struct Offspring {
    pub encoding: Vec<u32>,
    pub cost: f64,
    pub parents: [usize; 2],
}

#[derive(Clone, Debug)]
enum Selection {
    Tournament(usize),
    /// Cumulative probabilities indexed by rank (0 = best).
    Rank(Vec<f64>),
    DiversityFitness { pool: usize, keep: f64 },
}

#[derive(Clone, Copy, Debug)]
enum Cross {
    Identity,
    Order,
    OnePoint,
    TwoPoint,
    UniformPrecedence { bias: f64 },
}

#[derive(Clone, Copy, Debug)]
enum Mutation {
    Swap,
    MultiSwap(usize),
    Inversion,
    Insertion,
}

#[derive(Clone, Debug)]
enum Op {
    /// Already consumed before the tree walk.
    Select,
    Cross(Cross, f64),
    Mutate(Mutation, f64),
    LocalSearch { iterations: usize, tenure: usize },
    Seq(Vec<Op>),
    Choice { cdf: Vec<f64>, children: Vec<Op> },
    Gate { cutoff: f64, low: Box<Op>, high: Box<Op> },
}

struct Ctx<'a> {
    instance: &'a ProblemInstance,
    members: &'a [Individual],
    /// Member indices, best first.
    ranking: Vec<usize>,
    reps: u32,
    token_space: usize,
    diversity: f64,
}

fn slot_value(spec: &OperatorSpec, p: &PrimitiveNode, slot: &str) -> Result<f64, InterpError> {
    match p.bindings.get(slot) {
        Some(name) => spec
            .params
            .get(name)
            .copied()
            .ok_or_else(|| InterpError::MissingParameter(name.clone())),
        None => Ok(p.descriptor().param(slot).map(|d| d.default).unwrap_or(0.0)),
    }
}

fn rank_cdf(n: usize, pressure: f64) -> Vec<f64> {
    // Linear ranking: rank r (0 = best) gets (s - 2(s-1) r/(n-1)) / n.
    let mut acc = 0.0;
    (0..n)
        .map(|r| {
            let w = if n == 1 {
                1.0
            } else {
                (pressure - 2.0 * (pressure - 1.0) * r as f64 / (n - 1) as f64) / n as f64
            };
            acc += w.max(0.0);
            acc
        })
        .collect()
}

fn compile_selection(spec: &OperatorSpec, p: &PrimitiveNode, n: usize) -> Result<Selection, InterpError> {
    Ok(match p.name.as_str() {
        "tournament" => Selection::Tournament(slot_value(spec, p, "size")?.round().max(1.0) as usize),
        "rank" => Selection::Rank(rank_cdf(n, slot_value(spec, p, "pressure")?)),
        _ => Selection::DiversityFitness {
            pool: slot_value(spec, p, "pool")?.round().max(1.0) as usize,
            keep: slot_value(spec, p, "keep")?,
        },
    })
}

fn compile(spec: &OperatorSpec, node: &GraphNode) -> Result<Op, InterpError> {
    Ok(match node {
        GraphNode::Primitive(p) => match p.kind {
            NodeKind::Selection => Op::Select,
            NodeKind::Crossover => {
                let c = match p.name.as_str() {
                    "identity" => Cross::Identity,
                    "order" => Cross::Order,
                    "one_point" => Cross::OnePoint,
                    "two_point" => Cross::TwoPoint,
                    _ => Cross::UniformPrecedence {
                        bias: slot_value(spec, p, "bias")?.clamp(0.0, 1.0),
                    },
                };
                let rate = if matches!(c, Cross::Identity) {
                    1.0
                } else {
                    slot_value(spec, p, "rate")?.clamp(0.0, 1.0)
                };
                Op::Cross(c, rate)
            }
            NodeKind::Mutation => {
                let m = match p.name.as_str() {
                    "swap" => Mutation::Swap,
                    "multi_swap" => Mutation::MultiSwap(slot_value(spec, p, "k")?.round().max(0.0) as usize),
                    "inversion" => Mutation::Inversion,
                    _ => Mutation::Insertion,
                };
                Op::Mutate(m, slot_value(spec, p, "rate")?.clamp(0.0, 1.0))
            }
            _ => Op::LocalSearch {
                iterations: slot_value(spec, p, "iterations")?.round().max(0.0) as usize,
                tenure: slot_value(spec, p, "tenure")?.round().max(0.0) as usize,
            },
        },
        GraphNode::Sequence(children) => Op::Seq(children.iter().map(|c| compile(spec, c)).collect::<Result<_, _>>()?),
        GraphNode::Choice { weights, children } => {
            let mut acc = 0.0;
            let mut cdf = Vec::with_capacity(weights.len());
            for w in weights {
                acc += spec
                    .params
                    .get(w)
                    .copied()
                    .ok_or_else(|| InterpError::MissingParameter(w.clone()))?
                    .max(0.0);
                cdf.push(acc);
            }
            Op::Choice {
                cdf,
                children: children.iter().map(|c| compile(spec, c)).collect::<Result<_, _>>()?,
            }
        }
        GraphNode::Gate { bindings, children } => {
            let get = |slot: &str, default: f64| -> Result<f64, InterpError> {
                match bindings.get(slot) {
                    Some(name) => spec
                        .params
                        .get(name)
                        .copied()
                        .ok_or_else(|| InterpError::MissingParameter(name.clone())),
                    None => Ok(default),
                }
            };
            let threshold = get("threshold", super::catalog::DEFAULT_DIVERSITY_THRESHOLD)?;
            let lambda = get("lambda", 0.0)?;
            Op::Gate {
                cutoff: threshold * (1.0 + lambda),
                low: Box::new(compile(spec, &children[0])?),
                high: Box::new(compile(spec, &children[1])?),
            }
        }
    })
}

fn find_selection(node: &GraphNode) -> Option<&PrimitiveNode> {
    let mut found = None;
    node.walk(&mut |n| {
        if let GraphNode::Primitive(p) = n {
            if p.kind == NodeKind::Selection && found.is_none() {
                found = Some(p);
            }
        }
    });
    found
}

fn has_gate(node: &GraphNode) -> bool {
    let mut any = false;
    node.walk(&mut |n| any |= matches!(n, GraphNode::Gate { .. }));
    any
}

impl Selection {
    fn pick(&self, ctx: &Ctx, rng: &mut StreamRng) -> usize {
        let n = ctx.members.len();
        let better = |a: usize, b: usize| {
            let (ca, cb) = (ctx.members[a].cost, ctx.members[b].cost);
            ca < cb || (ca == cb && a < b)
        };
        match self {
            Selection::Tournament(size) => {
                let mut best = rng.random_range(0..n);
                for _ in 1..*size {
                    let c = rng.random_range(0..n);
                    if better(c, best) {
                        best = c;
                    }
                }
                best
            }
            Selection::Rank(cdf) => {
                let total = cdf.last().copied().unwrap_or(1.0);
                let u = rng.random::<f64>() * total;
                let r = cdf.partition_point(|&c| c <= u).min(n - 1);
                ctx.ranking[r]
            }
            Selection::DiversityFitness { pool, keep } => {
                let best = &ctx.members[ctx.ranking[0]].encoding;
                let mut cand: Vec<(f64, usize)> = (0..*pool)
                    .map(|_| {
                        let i = rng.random_range(0..n);
                        (positional_distance(&ctx.members[i].encoding, best), i)
                    })
                    .collect();
                // Farthest first; stable, so draw order breaks ties.
                cand.sort_by(|a, b| b.0.total_cmp(&a.0));
                let kept = ((*pool as f64 * keep).ceil() as usize).clamp(1, cand.len());
                cand[..kept]
                    .iter()
                    .map(|&(_, i)| i)
                    .reduce(|a, b| if better(b, a) { b } else { a })
                    .expect("non-empty pool")
            }
        }
    }
}

struct Child {
    enc: Vec<u32>,
    cost: Option<f64>,
    p2: usize,
    crossed: bool,
}

fn tokenize(enc: &[u32], reps: u32, counts: &mut [u32]) -> Vec<u32> {
    counts.iter_mut().for_each(|c| *c = 0);
    enc.iter()
        .map(|&v| {
            let occ = counts[v as usize];
            counts[v as usize] += 1;
            v * reps + occ
        })
        .collect()
}

fn two_cuts(rng: &mut StreamRng, l: usize) -> (usize, usize) {
    let a = rng.random_range(0..l);
    let b = rng.random_range(0..l);
    (a.min(b), a.max(b))
}

fn order_crossover(a: &[u32], b: &[u32], used: &mut [bool], rng: &mut StreamRng) -> Vec<u32> {
    let l = a.len();
    let (i, j) = two_cuts(rng, l);
    let mut child = vec![0u32; l];
    for k in i..=j {
        child[k] = a[k];
        used[a[k] as usize] = true;
    }
    let mut pos = (j + 1) % l;
    for k in 0..l {
        let t = b[(j + 1 + k) % l];
        if !used[t as usize] {
            child[pos] = t;
            pos = (pos + 1) % l;
        }
    }
    child
}

fn one_point(a: &[u32], b: &[u32], used: &mut [bool], rng: &mut StreamRng) -> Vec<u32> {
    let c = rng.random_range(1..a.len());
    let mut child = a[..c].to_vec();
    for &t in &a[..c] {
        used[t as usize] = true;
    }
    child.extend(b.iter().copied().filter(|&t| !used[t as usize]));
    child
}

fn two_point(a: &[u32], b: &[u32], used: &mut [bool], rng: &mut StreamRng) -> Vec<u32> {
    let l = a.len();
    let (i, j) = two_cuts(rng, l + 1);
    let mut child = vec![0u32; l];
    for k in i..j {
        child[k] = a[k];
        used[a[k] as usize] = true;
    }
    let mut fill = b.iter().copied().filter(|&t| !used[t as usize]);
    for (k, slot) in child.iter_mut().enumerate() {
        if k < i || k >= j {
            *slot = fill.next().expect("parents share a token set");
        }
    }
    child
}

fn uniform_precedence(a: &[u32], b: &[u32], used: &mut [bool], bias: f64, rng: &mut StreamRng) -> Vec<u32> {
    let l = a.len();
    let (mut pa, mut pb) = (0, 0);
    let mut child = Vec::with_capacity(l);
    for _ in 0..l {
        let (src, ptr) = if rng.random_bool(bias) { (a, &mut pa) } else { (b, &mut pb) };
        while used[src[*ptr] as usize] {
            *ptr += 1;
        }
        let t = src[*ptr];
        used[t as usize] = true;
        child.push(t);
    }
    child
}

fn random_swap(enc: &mut [u32], rng: &mut StreamRng) {
    let l = enc.len();
    let i = rng.random_range(0..l);
    let mut j = rng.random_range(0..l - 1);
    if j >= i {
        j += 1;
    }
    enc.swap(i, j);
}

fn mutate(m: Mutation, enc: &mut Vec<u32>, rng: &mut StreamRng) {
    let l = enc.len();
    match m {
        Mutation::Swap => random_swap(enc, rng),
        Mutation::MultiSwap(k) => {
            for _ in 0..k {
                random_swap(enc, rng);
            }
        }
        Mutation::Inversion => {
            let (i, j) = two_cuts(rng, l);
            enc[i..=j].reverse();
        }
        Mutation::Insertion => {
            let i = rng.random_range(0..l);
            let j = rng.random_range(0..l);
            let v = enc.remove(i);
            enc.insert(j, v);
        }
    }
}

fn local_search(
    instance: &ProblemInstance,
    enc: &mut [u32],
    cost: Option<f64>,
    iterations: usize,
    tenure: usize,
    rng: &mut StreamRng,
) -> f64 {
    let mut cur = cost.unwrap_or_else(|| instance.cost(enc));
    let l = enc.len();
    if l < 2 {
        return cur;
    }
    let mut tabu: VecDeque<(usize, usize)> = VecDeque::with_capacity(tenure);
    for _ in 0..iterations {
        let a = rng.random_range(0..l);
        let mut b = rng.random_range(0..l - 1);
        if b >= a {
            b += 1;
        }
        let mv = (a.min(b), a.max(b));
        if enc[mv.0] == enc[mv.1] || tabu.contains(&mv) {
            continue;
        }
        enc.swap(mv.0, mv.1);
        let c = instance.cost(enc);
        if c < cur {
            cur = c;
            if tenure > 0 {
                if tabu.len() == tenure {
                    tabu.pop_front();
                }
                tabu.push_back(mv);
            }
        } else {
            enc.swap(mv.0, mv.1);
        }
    }
    cur
}

fn exec(op: &Op, child: &mut Child, ctx: &Ctx, rng: &mut StreamRng, visits: &mut usize, cap: usize) -> Result<(), InterpError> {
    *visits += 1;
    if *visits > cap {
        return Err(InterpError::BudgetExceeded(cap));
    }
    match op {
        Op::Select => {}
        Op::Cross(c, rate) => {
            let fires = rng.random_bool(*rate);
            if fires && !matches!(c, Cross::Identity) && child.enc.len() >= 2 {
                let p2 = ctx.members[child.p2].encoding.as_slice();
                let mut counts = vec![0u32; ctx.token_space / ctx.reps as usize];
                let ta = tokenize(&child.enc, ctx.reps, &mut counts);
                let tb = tokenize(p2, ctx.reps, &mut counts);
                let mut used = vec![false; ctx.token_space];
                let out = match c {
                    Cross::Order => order_crossover(&ta, &tb, &mut used, rng),
                    Cross::OnePoint => one_point(&ta, &tb, &mut used, rng),
                    Cross::TwoPoint => two_point(&ta, &tb, &mut used, rng),
                    Cross::UniformPrecedence { bias } => uniform_precedence(&ta, &tb, &mut used, *bias, rng),
                    Cross::Identity => unreachable!(),
                };
                child.enc = out.into_iter().map(|t| t / ctx.reps).collect();
                child.cost = None;
                child.crossed = true;
            }
        }
        Op::Mutate(m, rate) => {
            if rng.random_bool(*rate) && child.enc.len() >= 2 {
                mutate(*m, &mut child.enc, rng);
                child.cost = None;
            }
        }
        Op::LocalSearch { iterations, tenure } => {
            let c = local_search(ctx.instance, &mut child.enc, child.cost, *iterations, *tenure, rng);
            child.cost = Some(c);
        }
        Op::Seq(children) => {
            for c in children {
                exec(c, child, ctx, rng, visits, cap)?;
            }
        }
        Op::Choice { cdf, children } => {
            let total = cdf.last().copied().unwrap_or(0.0);
            let idx = if total > 0.0 {
                let u = rng.random::<f64>() * total;
                cdf.partition_point(|&c| c <= u).min(children.len() - 1)
            } else {
                0
            };
            exec(&children[idx], child, ctx, rng, visits, cap)?;
        }
        Op::Gate { cutoff, low, high } => {
            let branch = if ctx.diversity < *cutoff { low } else { high };
            exec(branch, child, ctx, rng, visits, cap)?;
        }
    }
    Ok(())
}

/// Produces exactly `pop.len()` offspring.
pub fn apply_operator(spec: &OperatorSpec, pop: &Population, stream: SeedStream) -> Result<Vec<Offspring>, InterpError> {
    apply_operator_capped(spec, pop, stream, DEFAULT_NODE_CAP)
}

/// [`apply_operator`] with an explicit per-child node evaluation cap.
pub fn apply_operator_capped(
    spec: &OperatorSpec,
    pop: &Population,
    stream: SeedStream,
    cap: usize,
) -> Result<Vec<Offspring>, InterpError> {
    if spec.domain != pop.domain() {
        return Err(InterpError::DomainMismatch {
            spec: spec.domain,
            population: pop.domain(),
        });
    }
    let members = &pop.members;
    let n = members.len();
    let sel_node = find_selection(&spec.graph.root).ok_or(InterpError::NoSelection)?;
    let selection = compile_selection(spec, sel_node, n)?;
    let program = compile(spec, &spec.graph.root)?;

    let mut ranking: Vec<usize> = (0..n).collect();
    ranking.sort_by(|&a, &b| members[a].cost.total_cmp(&members[b].cost));
    let reps = match pop.instance.as_ref() {
        ProblemInstance::Jssp(j) => j.num_machines as u32,
        _ => 1,
    };
    let max_symbol = members[0].encoding.iter().copied().max().unwrap_or(0) as usize;
    let diversity = if has_gate(&spec.graph.root) {
        population_diversity(members, stream.derive_named("gate"))
    } else {
        0.0
    };
    let ctx = Ctx {
        instance: &pop.instance,
        members,
        ranking,
        reps,
        token_space: (max_symbol + 1) * reps as usize,
        diversity,
    };
    let children = stream.derive_named("children");

    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = children.derive(i as u64).rng();
            let p1 = selection.pick(&ctx, &mut rng);
            let p2 = selection.pick(&ctx, &mut rng);
            let mut child = Child {
                enc: members[p1].encoding.clone(),
                cost: Some(members[p1].cost),
                p2,
                crossed: false,
            };
            let mut visits = 0;
            exec(&program, &mut child, &ctx, &mut rng, &mut visits, cap)?;
            let cost = child.cost.unwrap_or_else(|| ctx.instance.cost(&child.enc));
            Ok(Offspring {
                encoding: child.enc,
                cost,
                parents: [p1, if child.crossed { p2 } else { p1 }],
            })
        })
        .collect()
}
