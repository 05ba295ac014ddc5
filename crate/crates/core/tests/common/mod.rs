//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use coevo_core::control::{ControlTrace, Event, LedgerItem, RunConfig, Variant};
use coevo_core::dsl::LabeledTree;
use coevo_core::problem::{Bks, BksMetric, JsspInstance, Operation, ProblemInstance, TspInstance};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Default run settings on a bundled instance.
pub fn config(instance: &str, variant: Variant, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::for_instance(data_dir().join(instance), data_dir().join("bks.txt"));
    cfg.run.variant = variant;
    cfg.run.seed = seed;
    cfg
}

/// A small, fast configuration.
pub fn tiny_config(instance: &str, variant: Variant, seed: u64) -> RunConfig {
    let mut cfg = config(instance, variant, seed);
    cfg.run.population_size = 12;
    cfg.run.algorithm_population_size = 3;
    cfg.run.horizon = 2;
    cfg.run.meta_generations = 5;
    cfg.run.probe_generations = 3;
    cfg.run.probe_rollouts = 2;
    cfg.run.budget = 60;
    cfg
}

pub fn random_jssp(jobs: usize, machines: usize, rng: &mut ChaCha8Rng) -> JsspInstance {
    let routing = (0..jobs)
        .map(|_| {
            let mut order: Vec<usize> = (0..machines).collect();
            order.shuffle(rng);
            order
                .into_iter()
                .map(|machine| Operation {
                    machine,
                    duration: rng.random_range(1..=9),
                })
                .collect()
        })
        .collect();
    let bks = Bks {
        value: 1.0,
        metric: BksMetric::Exact,
    };
    JsspInstance::new("random", routing, bks).unwrap()
}

pub fn random_coords(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
        .collect()
}

fn dist(c: &[[f64; 2]], i: usize, j: usize) -> f64 {
    ((c[i][0] - c[j][0]).powi(2) + (c[i][1] - c[j][1]).powi(2)).sqrt()
}

/// Nearest neighbour followed by 2-opt to a local optimum. Used as a
/// reference cost for random instances.
pub fn two_opt_reference(c: &[[f64; 2]]) -> f64 {
    let n = c.len();
    let mut tour = vec![0usize];
    let mut used = vec![false; n];
    used[0] = true;
    for _ in 1..n {
        let last = *tour.last().unwrap();
        let next = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| dist(c, last, a).total_cmp(&dist(c, last, b)))
            .unwrap();
        used[next] = true;
        tour.push(next);
    }
    loop {
        let mut improved = false;
        for i in 0..n - 1 {
            for j in i + 2..n {
                let (a, b, cc, d) = (tour[i], tour[i + 1], tour[j], tour[(j + 1) % n]);
                if a == d {
                    continue;
                }
                if dist(c, a, cc) + dist(c, b, d) < dist(c, a, b) + dist(c, cc, d) - 1e-10 {
                    tour[i + 1..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (0..n).map(|i| dist(c, tour[i], tour[(i + 1) % n])).sum()
}

/// A random Euclidean TSP whose reference cost comes from [`two_opt_reference`].
pub fn random_tsp(name: &str, n: usize, seed: u64) -> Arc<ProblemInstance> {
    let coords = random_coords(n, &mut rng(seed));
    let bks = Bks {
        value: two_opt_reference(&coords),
        metric: BksMetric::Exact,
    };
    Arc::new(ProblemInstance::Tsp(TspInstance::new(name, coords, bks).unwrap()))
}

// ---------------------------------------------------------------- JSSP oracle

/// Semi-active makespan of fixed machine orders by longest path over the
/// disjunctive graph. `None` when the orders contain a cycle.
pub fn makespan_of_orders(inst: &JsspInstance, orders: &[Vec<usize>]) -> Option<u64> {
    let (n, m) = (inst.num_jobs, inst.num_machines);
    // Node (j, k) is the k-th operation of job j.
    let id = |j: usize, k: usize| j * m + k;
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n * m];
    let mut indeg = vec![0usize; n * m];
    for j in 0..n {
        for k in 1..m {
            succ[id(j, k - 1)].push(id(j, k));
            indeg[id(j, k)] += 1;
        }
    }
    let pos = |j: usize, mach: usize| inst.routing[j].iter().position(|o| o.machine == mach).unwrap();
    for (mach, order) in orders.iter().enumerate() {
        for w in order.windows(2) {
            let (a, b) = (id(w[0], pos(w[0], mach)), id(w[1], pos(w[1], mach)));
            succ[a].push(b);
            indeg[b] += 1;
        }
    }
    let dur = |v: usize| u64::from(inst.routing[v / m][v % m].duration);
    let mut start = vec![0u64; n * m];
    let mut queue: Vec<usize> = (0..n * m).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    let mut best = 0;
    while let Some(v) = queue.pop() {
        seen += 1;
        let end = start[v] + dur(v);
        best = best.max(end);
        for &w in &succ[v] {
            start[w] = start[w].max(end);
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push(w);
            }
        }
    }
    (seen == n * m).then_some(best)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Optimal makespan by enumerating every combination of machine orders.
pub fn exhaustive_makespan(inst: &JsspInstance) -> u64 {
    let perms = permutations(inst.num_jobs);
    let m = inst.num_machines;
    let mut idx = vec![0usize; m];
    let mut best = u64::MAX;
    loop {
        let orders: Vec<Vec<usize>> = idx.iter().map(|&i| perms[i].clone()).collect();
        if let Some(ms) = makespan_of_orders(inst, &orders) {
            best = best.min(ms);
        }
        let mut d = 0;
        loop {
            if d == m {
                return best;
            }
            idx[d] += 1;
            if idx[d] < perms.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Machine orders induced by an operation sequence.
pub fn orders_of_sequence(inst: &JsspInstance, seq: &[u32]) -> Vec<Vec<usize>> {
    let mut next = vec![0usize; inst.num_jobs];
    let mut orders = vec![Vec::new(); inst.num_machines];
    for &j in seq {
        let j = j as usize;
        orders[inst.routing[j][next[j]].machine].push(j);
        next[j] += 1;
    }
    orders
}

/// Every distinct operation sequence (multiset permutation).
pub fn all_sequences(jobs: usize, machines: usize) -> Vec<Vec<u32>> {
    fn rec(left: &mut Vec<usize>, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if left.iter().all(|&c| c == 0) {
            out.push(cur.clone());
            return;
        }
        for j in 0..left.len() {
            if left[j] > 0 {
                left[j] -= 1;
                cur.push(j as u32);
                rec(left, cur, out);
                cur.pop();
                left[j] += 1;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut vec![machines; jobs], &mut Vec::new(), &mut out);
    out
}

// ---------------------------------------------------------------- TSP oracle

/// Held–Karp: optimal closed tour and its length, starting at node 0.
pub fn held_karp(c: &[[f64; 2]]) -> (Vec<u32>, f64) {
    let n = c.len();
    if n == 1 {
        return (vec![0], 0.0);
    }
    let full = 1usize << n;
    let mut dp = vec![f64::INFINITY; full * n];
    let mut parent = vec![usize::MAX; full * n];
    // mask {0}, ending at city 0
    dp[n] = 0.0;
    for mask in 1..full {
        if mask & 1 == 0 {
            continue;
        }
        for last in 0..n {
            let cur = dp[mask * n + last];
            if mask & (1 << last) == 0 || !cur.is_finite() {
                continue;
            }
            for next in 1..n {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nm = mask | (1 << next);
                let v = cur + dist(c, last, next);
                if v < dp[nm * n + next] {
                    dp[nm * n + next] = v;
                    parent[nm * n + next] = last;
                }
            }
        }
    }
    let all = full - 1;
    let (mut last, best) = (1..n)
        .map(|l| (l, dp[all * n + l] + dist(c, l, 0)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let mut tour = Vec::with_capacity(n);
    let mut mask = all;
    while mask != 1 {
        tour.push(last as u32);
        let p = parent[mask * n + last];
        mask &= !(1 << last);
        last = p;
    }
    tour.push(0);
    tour.reverse();
    (tour, best)
}

// ---------------------------------------------------------------- TED oracle

pub fn random_tree(max_nodes: usize, labels: &[&str], rng: &mut ChaCha8Rng) -> LabeledTree {
    let size = rng.random_range(1..=max_nodes);
    // Attach node i to a random earlier node, then order children by index.
    let parents: Vec<usize> = (1..size).map(|i| rng.random_range(0..i)).collect();
    let lab: Vec<String> = (0..size)
        .map(|_| labels[rng.random_range(0..labels.len())].to_string())
        .collect();
    fn build(i: usize, parents: &[usize], lab: &[String]) -> LabeledTree {
        let kids = (1..=parents.len())
            .filter(|&k| parents[k - 1] == i)
            .map(|k| build(k, parents, lab))
            .collect();
        LabeledTree::node(lab[i].clone(), kids)
    }
    build(0, &parents, &lab)
}

struct Flat {
    labels: Vec<String>,
    /// Preorder index of the last descendant of each node.
    last_desc: Vec<usize>,
}

fn flatten(t: &LabeledTree) -> Flat {
    fn rec(t: &LabeledTree, f: &mut Flat) {
        let me = f.labels.len();
        f.labels.push(t.label.clone());
        f.last_desc.push(me);
        for c in &t.children {
            rec(c, f);
        }
        f.last_desc[me] = f.labels.len() - 1;
    }
    let mut f = Flat {
        labels: Vec::new(),
        last_desc: Vec::new(),
    };
    rec(t, &mut f);
    f
}

/// Minimum-cost edit script by enumerating every valid edit mapping: a
/// one-to-one node mapping that preserves ancestry and left-to-right order.
pub fn brute_force_ted(a: &LabeledTree, b: &LabeledTree) -> usize {
    let (fa, fb) = (flatten(a), flatten(b));
    let anc = |f: &Flat, x: usize, y: usize| x < y && y <= f.last_desc[x];
    let left = |f: &Flat, x: usize, y: usize| x < y && !anc(f, x, y);
    let compatible = |p: (usize, usize), q: (usize, usize)| {
        p.0 != q.0
            && p.1 != q.1
            && anc(&fa, p.0, q.0) == anc(&fb, p.1, q.1)
            && anc(&fa, q.0, p.0) == anc(&fb, q.1, p.1)
            && left(&fa, p.0, q.0) == left(&fb, p.1, q.1)
            && left(&fa, q.0, p.0) == left(&fb, q.1, p.1)
    };
    let (na, nb) = (fa.labels.len(), fb.labels.len());
    let mut best = na + nb;
    let mut stack: Vec<(usize, Vec<(usize, usize)>)> = vec![(0, Vec::new())];
    while let Some((i, mapping)) = stack.pop() {
        if i == na {
            let relabel = mapping.iter().filter(|(x, y)| fa.labels[*x] != fb.labels[*y]).count();
            best = best.min(relabel + (na - mapping.len()) + (nb - mapping.len()));
            continue;
        }
        stack.push((i + 1, mapping.clone()));
        for j in 0..nb {
            if mapping.iter().all(|&p| compatible(p, (i, j))) {
                let mut m = mapping.clone();
                m.push((i, j));
                stack.push((i + 1, m));
            }
        }
    }
    best
}

// ---------------------------------------------------------- feature oracle

/// Features recomputed line by line from a CSV export with columns
/// generation,best_cost,mean_cost,diversity,successes,total_gain.
pub fn features_from_csv(csv: &str, offspring_per_generation: f64, bks: f64) -> [f64; 7] {
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|x| x.trim().parse::<f64>().unwrap()).collect())
        .collect();
    let n = rows.len();
    let gap = |r: &Vec<f64>| 100.0 * (r[1] - bks) / bks;
    let g: Vec<f64> = rows.iter().map(gap).collect();
    let mut vel = 0.0;
    for t in 1..n {
        vel += g[t - 1] - g[t];
    }
    vel /= (n - 1) as f64;
    let mut acc = 0.0;
    for t in 2..n {
        acc += (g[t] - g[t - 1]) - (g[t - 1] - g[t - 2]);
    }
    acc /= (n - 2) as f64;
    let mut loss = 0.0;
    for t in 1..n {
        loss += rows[t - 1][3] - rows[t][3];
    }
    loss /= (n - 1) as f64;
    let succ: f64 = rows.iter().map(|r| r[4]).sum();
    let gain: f64 = rows.iter().map(|r| r[5]).sum();
    let precision = succ / (offspring_per_generation * n as f64);
    let impact = if succ == 0.0 { 0.0 } else { 100.0 * gain / (succ * bks) };
    let mut last_imp = 0;
    for t in 1..n {
        if rows[t][1] < rows[t - 1][1] {
            last_imp = t;
        }
    }
    [vel, acc, rows[n - 1][3], loss, precision, impact, (n - 1 - last_imp) as f64]
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

// ------------------------------------------------------------ trace walker

/// Budget units recounted from probe reports alone, without ledger events.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct WalkedLedger {
    pub incumbents: u64,
    pub offspring: u64,
    pub offline: u64,
}

impl WalkedLedger {
    pub fn total(&self) -> u64 {
        self.incumbents + self.offspring + self.offline
    }
}

/// Walks the raw JSONL text, counting candidates × rollouts per probe event.
pub fn walk_probes(jsonl: &str) -> WalkedLedger {
    let mut w = WalkedLedger::default();
    for line in jsonl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if v["event"] != "probe" {
            continue;
        }
        let report = &v["report"];
        let units = report["candidates"].as_array().unwrap().len() as u64 * report["rollouts"].as_u64().unwrap();
        match v["purpose"].as_str().unwrap() {
            "incumbents" => w.incumbents += units,
            "offspring" => w.offspring += units,
            "offline" => w.offline += units,
            other => panic!("unknown purpose {other}"),
        }
    }
    w
}

/// Sum of ledger units per item, read from the typed trace.
pub fn ledger_items(trace: &ControlTrace) -> (u64, u64, u64) {
    let mut t = (0, 0, 0);
    for e in &trace.events {
        if let Event::Ledger { item, units, .. } = e {
            match item {
                LedgerItem::Reevaluations => t.0 += units,
                LedgerItem::ProbeRollouts => t.1 += units,
                LedgerItem::OfflineRollouts => t.2 += units,
            }
        }
    }
    t
}

pub fn applied_ids(trace: &ControlTrace) -> Vec<String> {
    trace
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Apply { spec_id, .. } => Some(spec_id.to_string()),
            _ => None,
        })
        .collect()
}

/// JSONL with prompt text and the header variant blanked.
pub fn mask_prompts(jsonl: &str) -> Vec<serde_json::Value> {
    jsonl
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            if v["event"] == "header" {
                v["variant"] = serde_json::Value::Null;
            }
            if v["event"] == "backend" {
                v["exchange"]["request"]["prompt"] = serde_json::Value::Null;
            }
            v
        })
        .collect()
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}
