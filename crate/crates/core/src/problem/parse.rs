//! Readers for Taillard, TSPLIB and CVRPLIB text files and the BKS registry.

use std::collections::BTreeMap;
use std::path::Path;

use super::instance::*;
use super::ProblemError;

/// Best-known-solution values keyed by instance name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BksRegistry {
    entries: BTreeMap<String, Bks>,
}

impl BksRegistry {
    /// Parses `instance_name cost metric` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ProblemError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [name, cost, metric] = fields.as_slice() else {
                return Err(ProblemError::Registry(format!(
                    "line {}: expected `name cost metric`, got {line:?}",
                    lineno + 1
                )));
            };
            let value: f64 = cost
                .parse()
                .map_err(|_| ProblemError::Registry(format!("line {}: bad cost {cost:?}", lineno + 1)))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(ProblemError::Registry(format!(
                    "line {}: cost must be positive",
                    lineno + 1
                )));
            }
            let metric = match metric.to_ascii_lowercase().as_str() {
                "exact" => BksMetric::Exact,
                "rounded" => BksMetric::Rounded,
                other => {
                    return Err(ProblemError::Registry(format!(
                        "line {}: unknown metric {other:?}",
                        lineno + 1
                    )))
                }
            };
            entries.insert(name.to_string(), Bks { value, metric });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ProblemError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProblemError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn insert(&mut self, name: impl Into<String>, bks: Bks) {
        self.entries.insert(name.into(), bks);
    }

    /// Exact match first, then case-insensitive.
    pub fn get(&self, name: &str) -> Option<Bks> {
        self.entries.get(name).copied().or_else(|| {
            self.entries
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(name))
                .map(|(_, v)| *v)
        })
    }

    pub fn lookup(&self, name: &str) -> Result<Bks, ProblemError> {
        self.get(name)
            .ok_or_else(|| ProblemError::MissingBks(name.to_string()))
    }
}

/// Parses a benchmark file. `name` is the registry key used for the BKS; for
/// TSPLIB/CVRPLIB files a `NAME` header overrides it.
pub fn parse_instance(
    name: &str,
    text: &str,
    format: InstanceFormat,
    registry: &BksRegistry,
) -> Result<ProblemInstance, ProblemError> {
    match format {
        InstanceFormat::Taillard => parse_taillard(name, text, registry).map(ProblemInstance::Jssp),
        InstanceFormat::Tsplib => parse_tsplib(name, text, registry).map(ProblemInstance::Tsp),
        InstanceFormat::Cvrplib => parse_cvrplib(name, text, registry).map(ProblemInstance::Cvrp),
    }
}

/// Reads an instance file; the file stem is the fallback instance name.
pub fn load_instance(
    path: &Path,
    format: InstanceFormat,
    registry: &BksRegistry,
) -> Result<ProblemInstance, ProblemError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ProblemError::Io(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("instance");
    parse_instance(stem, &text, format, registry)
}

fn parse_number<T: std::str::FromStr>(tok: &str, what: &str) -> Result<T, ProblemError> {
    tok.parse()
        .map_err(|_| ProblemError::MalformedHeader(format!("{what}: cannot parse {tok:?}")))
}

/// Taillard layout: a header line `jobs machines [seeds, bounds...]`, the
/// processing-time matrix, then the machine-order matrix. Section titles
/// (`Times`, `Machines`) and a leading description line are optional. Machine
/// ids are 1-based unless a 0 appears.
fn parse_taillard(name: &str, text: &str, registry: &BksRegistry) -> Result<JsspInstance, ProblemError> {
    let numeric_lines: Vec<Vec<&str>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .filter(|l| l.split_whitespace().all(|t| t.parse::<i64>().is_ok()))
        .map(|l| l.split_whitespace().collect())
        .collect();
    let header = numeric_lines
        .first()
        .ok_or_else(|| ProblemError::MalformedHeader("no numeric header line".into()))?;
    if header.len() < 2 {
        return Err(ProblemError::MalformedHeader(
            "header must start with the job and machine counts".into(),
        ));
    }
    let jobs: usize = parse_number(header[0], "job count")?;
    let machines: usize = parse_number(header[1], "machine count")?;
    if jobs == 0 || machines == 0 {
        return Err(ProblemError::MalformedHeader("job and machine counts must be positive".into()));
    }
    let body: Vec<i64> = numeric_lines[1..]
        .iter()
        .flatten()
        .map(|t| t.parse::<i64>().expect("filtered numeric"))
        .collect();
    let cells = jobs * machines;
    if body.len() != 2 * cells {
        return Err(ProblemError::DimensionMismatch {
            what: "time and machine matrix entries".into(),
            expected: 2 * cells,
            found: body.len(),
        });
    }
    let (times, orders) = body.split_at(cells);
    let zero_based = orders.contains(&0);
    let mut routing = Vec::with_capacity(jobs);
    for j in 0..jobs {
        let mut ops = Vec::with_capacity(machines);
        for k in 0..machines {
            let t = times[j * machines + k];
            let m = orders[j * machines + k] - if zero_based { 0 } else { 1 };
            if t <= 0 {
                return Err(ProblemError::Invariant(format!(
                    "job {j} operation {k}: processing time must be positive"
                )));
            }
            if m < 0 || m as usize >= machines {
                return Err(ProblemError::Invariant(format!(
                    "job {j} operation {k}: machine id out of range"
                )));
            }
            ops.push(Operation {
                machine: m as usize,
                duration: u32::try_from(t)
                    .map_err(|_| ProblemError::Invariant("processing time too large".into()))?,
            });
        }
        routing.push(ops);
    }
    let bks = registry.lookup(name)?;
    JsspInstance::new(name, routing, bks)
}

/// `KEY : VALUE` header lines followed by named sections.
struct TsplibDoc<'a> {
    header: BTreeMap<String, String>,
    sections: BTreeMap<String, Vec<&'a str>>,
}

const SECTION_NAMES: [&str; 4] = [
    "NODE_COORD_SECTION",
    "DEMAND_SECTION",
    "DEPOT_SECTION",
    "TOUR_SECTION",
];

fn split_tsplib(text: &str) -> Result<TsplibDoc<'_>, ProblemError> {
    let mut header = BTreeMap::new();
    let mut sections: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        let upper = line.to_ascii_uppercase();
        if let Some(sec) = SECTION_NAMES.iter().find(|s| upper.starts_with(**s)) {
            current = Some(sec.to_string());
            sections.entry(sec.to_string()).or_default();
            continue;
        }
        if upper.ends_with("_SECTION") {
            return Err(ProblemError::MalformedHeader(format!("unsupported section {line}")));
        }
        match &current {
            Some(sec) => sections.get_mut(sec).expect("inserted").push(line),
            None => {
                let (k, v) = line.split_once(':').ok_or_else(|| {
                    ProblemError::MalformedHeader(format!("expected `KEY : VALUE`, got {line:?}"))
                })?;
                header.insert(k.trim().to_ascii_uppercase(), v.trim().to_string());
            }
        }
    }
    Ok(TsplibDoc { header, sections })
}

impl TsplibDoc<'_> {
    fn require(&self, key: &str) -> Result<&str, ProblemError> {
        self.header
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ProblemError::MalformedHeader(format!("missing {key}")))
    }

    fn dimension(&self) -> Result<usize, ProblemError> {
        parse_number(self.require("DIMENSION")?, "DIMENSION")
    }

    fn check_euclidean(&self) -> Result<(), ProblemError> {
        let ewt = self.require("EDGE_WEIGHT_TYPE")?;
        if !ewt.eq_ignore_ascii_case("EUC_2D") {
            return Err(ProblemError::UnsupportedEdgeWeight(ewt.to_string()));
        }
        Ok(())
    }

    fn name_or<'b>(&'b self, fallback: &'b str) -> &'b str {
        self.header.get("NAME").map(String::as_str).unwrap_or(fallback)
    }

    fn coords(&self, n: usize) -> Result<Vec<[f64; 2]>, ProblemError> {
        let lines = self
            .sections
            .get("NODE_COORD_SECTION")
            .ok_or_else(|| ProblemError::MalformedHeader("missing NODE_COORD_SECTION".into()))?;
        if lines.len() != n {
            return Err(ProblemError::DimensionMismatch {
                what: "NODE_COORD_SECTION entries".into(),
                expected: n,
                found: lines.len(),
            });
        }
        let mut coords = vec![None; n];
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 3 {
                return Err(ProblemError::MalformedHeader(format!("bad coordinate line {line:?}")));
            }
            let id: usize = parse_number(toks[0], "node id")?;
            let x: f64 = parse_number(toks[1], "x coordinate")?;
            let y: f64 = parse_number(toks[2], "y coordinate")?;
            if id == 0 || id > n {
                return Err(ProblemError::Invariant(format!("node id {id} outside 1..={n}")));
            }
            if coords[id - 1].replace([x, y]).is_some() {
                return Err(ProblemError::Invariant(format!("duplicate node id {id}")));
            }
        }
        Ok(coords.into_iter().map(|c| c.expect("all ids present")).collect())
    }
}

fn parse_tsplib(name: &str, text: &str, registry: &BksRegistry) -> Result<TspInstance, ProblemError> {
    let doc = split_tsplib(text)?;
    if let Some(ty) = doc.header.get("TYPE") {
        if !ty.eq_ignore_ascii_case("TSP") {
            return Err(ProblemError::MalformedHeader(format!("TYPE {ty} is not TSP")));
        }
    }
    doc.check_euclidean()?;
    let n = doc.dimension()?;
    let coords = doc.coords(n)?;
    let name = doc.name_or(name);
    let bks = registry.lookup(name)?;
    TspInstance::new(name, coords, bks)
}

fn parse_cvrplib(name: &str, text: &str, registry: &BksRegistry) -> Result<CvrpInstance, ProblemError> {
    let doc = split_tsplib(text)?;
    if let Some(ty) = doc.header.get("TYPE") {
        if !ty.eq_ignore_ascii_case("CVRP") {
            return Err(ProblemError::MalformedHeader(format!("TYPE {ty} is not CVRP")));
        }
    }
    doc.check_euclidean()?;
    let n = doc.dimension()?;
    let capacity: u32 = parse_number(doc.require("CAPACITY")?, "CAPACITY")?;
    let coords = doc.coords(n)?;

    let demand_lines = doc
        .sections
        .get("DEMAND_SECTION")
        .ok_or_else(|| ProblemError::MalformedHeader("missing DEMAND_SECTION".into()))?;
    if demand_lines.len() != n {
        return Err(ProblemError::DimensionMismatch {
            what: "DEMAND_SECTION entries".into(),
            expected: n,
            found: demand_lines.len(),
        });
    }
    let mut demands = vec![0u32; n];
    for line in demand_lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(ProblemError::MalformedHeader(format!("bad demand line {line:?}")));
        }
        let id: usize = parse_number(toks[0], "node id")?;
        if id == 0 || id > n {
            return Err(ProblemError::Invariant(format!("demand for unknown node {id}")));
        }
        demands[id - 1] = parse_number(toks[1], "demand")?;
    }

    let depot = match doc.sections.get("DEPOT_SECTION") {
        Some(lines) => {
            let ids: Vec<i64> = lines
                .iter()
                .flat_map(|l| l.split_whitespace())
                .map(|t| parse_number::<i64>(t, "depot id"))
                .collect::<Result<_, _>>()?;
            let ids: Vec<i64> = ids.into_iter().take_while(|&i| i != -1).collect();
            match ids.as_slice() {
                [d] if *d >= 1 && (*d as usize) <= n => *d as usize - 1,
                _ => {
                    return Err(ProblemError::MalformedHeader(
                        "DEPOT_SECTION must list exactly one valid depot".into(),
                    ))
                }
            }
        }
        None => 0,
    };

    let name = doc.name_or(name);
    let bks = registry.lookup(name)?;
    CvrpInstance::new(name, depot, coords, demands, capacity, bks)
}

/// Reads a TSPLIB `.tour` file into a 0-based node sequence.
pub fn parse_tour(text: &str) -> Result<Vec<u32>, ProblemError> {
    let doc = split_tsplib(text)?;
    let lines = doc
        .sections
        .get("TOUR_SECTION")
        .ok_or_else(|| ProblemError::MalformedHeader("missing TOUR_SECTION".into()))?;
    let mut tour = Vec::new();
    for tok in lines.iter().flat_map(|l| l.split_whitespace()) {
        let id: i64 = parse_number(tok, "tour node")?;
        if id == -1 {
            break;
        }
        if id < 1 {
            return Err(ProblemError::Invariant(format!("tour node {id} is not 1-based")));
        }
        tour.push((id - 1) as u32);
    }
    if let Ok(n) = doc.dimension() {
        if n != tour.len() {
            return Err(ProblemError::DimensionMismatch {
                what: "tour length".into(),
                expected: n,
                found: tour.len(),
            });
        }
    }
    Ok(tour)
}
