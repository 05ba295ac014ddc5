use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ProblemError;

/// Problem family of an instance, spec or population.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Jssp,
    Tsp,
    Cvrp,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Jssp, Domain::Tsp, Domain::Cvrp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Jssp => "jssp",
            Domain::Tsp => "tsp",
            Domain::Cvrp => "cvrp",
        }
    }

    /// Human-readable problem name used in prompts.
    pub fn long_name(&self) -> &'static str {
        match self {
            Domain::Jssp => "Job Shop Scheduling Problem (JSSP)",
            Domain::Tsp => "Traveling Salesman Problem (TSP)",
            Domain::Cvrp => "Capacitated Vehicle Routing Problem (CVRP)",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "jssp" => Ok(Domain::Jssp),
            "tsp" => Ok(Domain::Tsp),
            "cvrp" => Ok(Domain::Cvrp),
            other => Err(ProblemError::UnknownDomain(other.to_string())),
        }
    }
}

/// Benchmark file format accepted by [`super::parse_instance`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceFormat {
    Taillard,
    Tsplib,
    Cvrplib,
}

impl InstanceFormat {
    pub fn domain(&self) -> Domain {
        match self {
            InstanceFormat::Taillard => Domain::Jssp,
            InstanceFormat::Tsplib => Domain::Tsp,
            InstanceFormat::Cvrplib => Domain::Cvrp,
        }
    }
}

impl FromStr for InstanceFormat {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "taillard" => Ok(InstanceFormat::Taillard),
            "tsplib" => Ok(InstanceFormat::Tsplib),
            "cvrplib" => Ok(InstanceFormat::Cvrplib),
            other => Err(ProblemError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for InstanceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InstanceFormat::Taillard => "taillard",
            InstanceFormat::Tsplib => "tsplib",
            InstanceFormat::Cvrplib => "cvrplib",
        })
    }
}

/// Distance convention under which a best-known value was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BksMetric {
    /// Same metric as [`super::evaluate`]; a matching solution has gap 0.
    Exact,
    /// TSPLIB integer-rounded distances; only an approximate reference.
    Rounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bks {
    pub value: f64,
    pub metric: BksMetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operation {
    pub machine: usize,
    pub duration: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JsspInstance {
    pub name: String,
    pub num_jobs: usize,
    pub num_machines: usize,
    /// `routing[job]` is the job's technological order.
    pub routing: Vec<Vec<Operation>>,
    pub bks: Bks,
}

impl JsspInstance {
    pub fn new(name: impl Into<String>, routing: Vec<Vec<Operation>>, bks: Bks) -> Result<Self, ProblemError> {
        let num_jobs = routing.len();
        if num_jobs == 0 {
            return Err(ProblemError::Invariant("instance has no jobs".into()));
        }
        let num_machines = routing[0].len();
        if num_machines == 0 {
            return Err(ProblemError::Invariant("instance has no machines".into()));
        }
        for (j, ops) in routing.iter().enumerate() {
            if ops.len() != num_machines {
                return Err(ProblemError::DimensionMismatch {
                    what: format!("operations of job {j}"),
                    expected: num_machines,
                    found: ops.len(),
                });
            }
            let mut seen = vec![false; num_machines];
            for op in ops {
                if op.machine >= num_machines {
                    return Err(ProblemError::Invariant(format!(
                        "job {j} references machine {} of {num_machines}",
                        op.machine
                    )));
                }
                if std::mem::replace(&mut seen[op.machine], true) {
                    return Err(ProblemError::Invariant(format!(
                        "job {j} visits machine {} twice",
                        op.machine
                    )));
                }
                if op.duration == 0 {
                    return Err(ProblemError::Invariant(format!("job {j} has a zero processing time")));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            num_jobs,
            num_machines,
            routing,
            bks,
        })
    }

    /// max(per-job total, per-machine total); no schedule beats it.
    pub fn trivial_lower_bound(&self) -> u64 {
        let job = self
            .routing
            .iter()
            .map(|ops| ops.iter().map(|o| u64::from(o.duration)).sum::<u64>())
            .max()
            .unwrap_or(0);
        let mut machine = vec![0u64; self.num_machines];
        for ops in &self.routing {
            for o in ops {
                machine[o.machine] += u64::from(o.duration);
            }
        }
        job.max(machine.into_iter().max().unwrap_or(0))
    }
}

/// Dense symmetric Euclidean distance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn euclidean(coords: &[[f64; 2]]) -> Self {
        let n = coords.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = coords[i][0] - coords[j][0];
                let dy = coords[i][1] - coords[j][1];
                let d = dx.hypot(dy);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TspInstance {
    pub name: String,
    pub coords: Vec<[f64; 2]>,
    pub bks: Bks,
    pub(crate) dist: DistanceMatrix,
}

impl TspInstance {
    pub fn new(name: impl Into<String>, coords: Vec<[f64; 2]>, bks: Bks) -> Result<Self, ProblemError> {
        if coords.len() < 3 {
            return Err(ProblemError::Invariant(format!(
                "a TSP instance needs at least 3 nodes, got {}",
                coords.len()
            )));
        }
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(ProblemError::Invariant("non-finite coordinate".into()));
        }
        let dist = DistanceMatrix::euclidean(&coords);
        Ok(Self {
            name: name.into(),
            coords,
            bks,
            dist,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist.get(i, j)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvrpInstance {
    pub name: String,
    pub depot: usize,
    pub coords: Vec<[f64; 2]>,
    /// Indexed by node id; the depot entry is 0.
    pub demands: Vec<u32>,
    pub capacity: u32,
    pub bks: Bks,
    pub(crate) dist: DistanceMatrix,
}

impl CvrpInstance {
    pub fn new(
        name: impl Into<String>,
        depot: usize,
        coords: Vec<[f64; 2]>,
        demands: Vec<u32>,
        capacity: u32,
        bks: Bks,
    ) -> Result<Self, ProblemError> {
        if coords.len() < 2 {
            return Err(ProblemError::Invariant("a CVRP instance needs a depot and a customer".into()));
        }
        if demands.len() != coords.len() {
            return Err(ProblemError::DimensionMismatch {
                what: "demand entries".into(),
                expected: coords.len(),
                found: demands.len(),
            });
        }
        if depot >= coords.len() {
            return Err(ProblemError::Invariant(format!("depot {depot} out of range")));
        }
        if capacity == 0 {
            return Err(ProblemError::Invariant("capacity must be positive".into()));
        }
        if demands[depot] != 0 {
            return Err(ProblemError::Invariant("depot demand must be 0".into()));
        }
        if let Some((i, d)) = demands.iter().enumerate().find(|(_, &d)| d > capacity) {
            return Err(ProblemError::Invariant(format!(
                "customer {i} demand {d} exceeds capacity {capacity}"
            )));
        }
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(ProblemError::Invariant("non-finite coordinate".into()));
        }
        let dist = DistanceMatrix::euclidean(&coords);
        Ok(Self {
            name: name.into(),
            depot,
            coords,
            demands,
            capacity,
            bks,
            dist,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn customers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.coords.len()).filter(move |&i| i != self.depot)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist.get(i, j)
    }
}

/// One of the three supported benchmark instances.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemInstance {
    Jssp(JsspInstance),
    Tsp(TspInstance),
    Cvrp(CvrpInstance),
}

impl ProblemInstance {
    pub fn domain(&self) -> Domain {
        match self {
            ProblemInstance::Jssp(_) => Domain::Jssp,
            ProblemInstance::Tsp(_) => Domain::Tsp,
            ProblemInstance::Cvrp(_) => Domain::Cvrp,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ProblemInstance::Jssp(i) => &i.name,
            ProblemInstance::Tsp(i) => &i.name,
            ProblemInstance::Cvrp(i) => &i.name,
        }
    }

    pub fn bks(&self) -> Bks {
        match self {
            ProblemInstance::Jssp(i) => i.bks,
            ProblemInstance::Tsp(i) => i.bks,
            ProblemInstance::Cvrp(i) => i.bks,
        }
    }

    /// The multiset every valid encoding is a permutation of, in canonical order.
    pub fn symbols(&self) -> Vec<u32> {
        match self {
            ProblemInstance::Jssp(i) => (0..i.num_jobs as u32)
                .flat_map(|j| std::iter::repeat_n(j, i.num_machines))
                .collect(),
            ProblemInstance::Tsp(i) => (0..i.num_nodes() as u32).collect(),
            ProblemInstance::Cvrp(i) => i.customers().map(|c| c as u32).collect(),
        }
    }

    pub fn encoding_len(&self) -> usize {
        match self {
            ProblemInstance::Jssp(i) => i.num_jobs * i.num_machines,
            ProblemInstance::Tsp(i) => i.num_nodes(),
            ProblemInstance::Cvrp(i) => i.num_nodes() - 1,
        }
    }

    /// Checks the permutation invariant of an encoding.
    pub fn check_encoding(&self, encoding: &[u32]) -> Result<(), ProblemError> {
        let expected = self.encoding_len();
        if encoding.len() != expected {
            return Err(ProblemError::DimensionMismatch {
                what: "encoding length".into(),
                expected,
                found: encoding.len(),
            });
        }
        let mut sorted = encoding.to_vec();
        sorted.sort_unstable();
        let mut canonical = self.symbols();
        canonical.sort_unstable();
        if sorted != canonical {
            return Err(ProblemError::InvalidEncoding(format!(
                "encoding is not a permutation of the {} symbol set",
                self.domain()
            )));
        }
        Ok(())
    }
}

/// A candidate solution: a domain-tagged permutation plus optional cached cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub domain: Domain,
    pub encoding: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cached_cost: Option<f64>,
}

impl Solution {
    pub fn new(domain: Domain, encoding: Vec<u32>) -> Self {
        Self {
            domain,
            encoding,
            cached_cost: None,
        }
    }
}
