use serde::{Deserialize, Serialize};

use super::instance::*;
use super::ProblemError;

/// Makespan of the semi-active schedule decoded from an operation sequence.
///
/// The k-th occurrence of job `j` is the job's k-th operation; it starts at
/// the later of its machine becoming free and its job predecessor finishing.
pub fn jssp_makespan(inst: &JsspInstance, sequence: &[u32]) -> u64 {
    let mut next_op = vec![0usize; inst.num_jobs];
    let mut job_free = vec![0u64; inst.num_jobs];
    let mut machine_free = vec![0u64; inst.num_machines];
    let mut makespan = 0;
    for &job in sequence {
        let j = job as usize;
        let op = inst.routing[j][next_op[j]];
        next_op[j] += 1;
        let start = job_free[j].max(machine_free[op.machine]);
        let end = start + u64::from(op.duration);
        job_free[j] = end;
        machine_free[op.machine] = end;
        makespan = makespan.max(end);
    }
    makespan
}

/// Closed-tour Euclidean length, summed in tour order.
pub fn tour_length(inst: &TspInstance, tour: &[u32]) -> f64 {
    let n = tour.len();
    let mut total = 0.0;
    for i in 0..n {
        total += inst.distance(tour[i] as usize, tour[(i + 1) % n] as usize);
    }
    total
}

/// Greedy left-to-right capacity split of a giant tour: a route is closed as
/// soon as the next customer would overflow it.
pub fn greedy_split(inst: &CvrpInstance, giant_tour: &[u32]) -> Vec<Vec<u32>> {
    let mut routes = Vec::new();
    let mut current = Vec::new();
    let mut load = 0u32;
    for &c in giant_tour {
        let d = inst.demands[c as usize];
        if !current.is_empty() && load + d > inst.capacity {
            routes.push(std::mem::take(&mut current));
            load = 0;
        }
        current.push(c);
        load += d;
    }
    if !current.is_empty() {
        routes.push(current);
    }
    routes
}

/// Depot-anchored length of one route.
pub fn route_length(inst: &CvrpInstance, route: &[u32]) -> f64 {
    let Some((&first, _)) = route.split_first() else {
        return 0.0;
    };
    let mut total = inst.distance(inst.depot, first as usize);
    for w in route.windows(2) {
        total += inst.distance(w[0] as usize, w[1] as usize);
    }
    total + inst.distance(*route.last().expect("non-empty") as usize, inst.depot)
}

pub fn routes_length(inst: &CvrpInstance, routes: &[Vec<u32>]) -> f64 {
    routes.iter().map(|r| route_length(inst, r)).sum()
}

impl ProblemInstance {
    /// Cost of an encoding that is already known to be valid. This is the hot
    /// path used by the evolution engine.
    pub fn cost(&self, encoding: &[u32]) -> f64 {
        match self {
            ProblemInstance::Jssp(i) => jssp_makespan(i, encoding) as f64,
            ProblemInstance::Tsp(i) => tour_length(i, encoding),
            ProblemInstance::Cvrp(i) => {
                let mut total = 0.0;
                let mut load = 0u32;
                let mut prev = i.depot;
                for &c in encoding {
                    let c = c as usize;
                    let d = i.demands[c];
                    if prev != i.depot && load + d > i.capacity {
                        total += i.distance(prev, i.depot);
                        prev = i.depot;
                        load = 0;
                    }
                    total += i.distance(prev, c);
                    prev = c;
                    load += d;
                }
                total + i.distance(prev, i.depot)
            }
        }
    }
}

/// Cost of a solution. Pure in `(instance, encoding)`.
pub fn evaluate(instance: &ProblemInstance, solution: &Solution) -> Result<f64, ProblemError> {
    if solution.domain != instance.domain() {
        return Err(ProblemError::DomainMismatch {
            instance: instance.domain(),
            solution: solution.domain,
        });
    }
    instance.check_encoding(&solution.encoding)?;
    Ok(instance.cost(&solution.encoding))
}

/// Percent gap of `cost` above the best-known value. Negative when the BKS is beaten.
pub fn optimality_gap(cost: f64, bks: f64) -> Result<f64, ProblemError> {
    if !bks.is_finite() || bks <= 0.0 {
        return Err(ProblemError::NonPositiveBks(bks));
    }
    Ok(100.0 * (cost - bks) / bks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteLoad {
    pub route: usize,
    pub load: u64,
}

/// Outcome of a capacity audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub capacity: u32,
    pub loads: Vec<RouteLoad>,
    pub violations: Vec<RouteLoad>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn num_routes(&self) -> usize {
        self.loads.len()
    }
}

/// Audits an explicit route set against the vehicle capacity.
pub fn check_routes(inst: &CvrpInstance, routes: &[Vec<u32>]) -> FeasibilityReport {
    let loads: Vec<RouteLoad> = routes
        .iter()
        .enumerate()
        .map(|(route, r)| RouteLoad {
            route,
            load: r.iter().map(|&c| u64::from(inst.demands[c as usize])).sum(),
        })
        .collect();
    let violations = loads
        .iter()
        .filter(|l| l.load > u64::from(inst.capacity))
        .cloned()
        .collect();
    FeasibilityReport {
        capacity: inst.capacity,
        loads,
        violations,
    }
}

/// Audits the greedy split of a giant-tour solution.
pub fn check_feasible(inst: &CvrpInstance, solution: &Solution) -> FeasibilityReport {
    check_routes(inst, &greedy_split(inst, &solution.encoding))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(v: f64) -> Bks {
        Bks { value: v, metric: BksMetric::Exact }
    }

    fn op(machine: usize, duration: u32) -> Operation {
        Operation { machine, duration }
    }

    fn two_by_two() -> JsspInstance {
        JsspInstance::new(
            "2x2",
            vec![vec![op(0, 3), op(1, 2)], vec![op(1, 2), op(0, 4)]],
            exact(7.0),
        )
        .unwrap()
    }

    /// Longest path over an explicit machine ordering, or None if the
    /// ordering deadlocks. Independent of the sequence decoder.
    fn longest_path(inst: &JsspInstance, machine_orders: &[Vec<usize>]) -> Option<u64> {
        let mut done = vec![0usize; inst.num_jobs];
        let mut pos = vec![0usize; inst.num_machines];
        let mut job_free = vec![0u64; inst.num_jobs];
        let mut mach_free = vec![0u64; inst.num_machines];
        let total = inst.num_jobs * inst.num_machines;
        let mut scheduled = 0;
        while scheduled < total {
            let mut progressed = false;
            for m in 0..inst.num_machines {
                if pos[m] == machine_orders[m].len() {
                    continue;
                }
                let j = machine_orders[m][pos[m]];
                if done[j] < inst.num_machines && inst.routing[j][done[j]].machine == m {
                    let d = u64::from(inst.routing[j][done[j]].duration);
                    let end = job_free[j].max(mach_free[m]) + d;
                    job_free[j] = end;
                    mach_free[m] = end;
                    done[j] += 1;
                    pos[m] += 1;
                    scheduled += 1;
                    progressed = true;
                }
            }
            if !progressed {
                return None;
            }
        }
        job_free.into_iter().max()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
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

    #[test]
    fn single_operation_makespan() {
        let inst = JsspInstance::new("one", vec![vec![op(0, 7)]], exact(7.0)).unwrap();
        let pi = ProblemInstance::Jssp(inst);
        let s = Solution::new(Domain::Jssp, vec![0]);
        assert_eq!(evaluate(&pi, &s).unwrap(), 7.0);
    }

    #[test]
    fn two_by_two_matches_exhaustive_scheduler() {
        let inst = two_by_two();
        // Oracle first: every pair of machine orders, longest path.
        let perms = permutations(2);
        let mut optimum = u64::MAX;
        for a in &perms {
            for b in &perms {
                if let Some(v) = longest_path(&inst, &[a.clone(), b.clone()]) {
                    optimum = optimum.min(v);
                }
            }
        }
        assert_eq!(optimum, 7);
        // The example encoding decodes to the optimum, and no encoding beats it.
        assert_eq!(jssp_makespan(&inst, &[0, 1, 0, 1]), 7);
        let all = [[0, 0, 1, 1], [0, 1, 0, 1], [0, 1, 1, 0], [1, 0, 0, 1], [1, 0, 1, 0], [1, 1, 0, 0]];
        let best = all.iter().map(|e| jssp_makespan(&inst, e)).min().unwrap();
        assert_eq!(best, optimum);
        assert_eq!(jssp_makespan(&inst, &[1, 1, 0, 0]), 11);
    }

    #[test]
    fn triangle_perimeter() {
        let inst = TspInstance::new("tri", vec![[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]], exact(12.0)).unwrap();
        let pi = ProblemInstance::Tsp(inst);
        assert_eq!(evaluate(&pi, &Solution::new(Domain::Tsp, vec![0, 1, 2])).unwrap(), 12.0);
    }

    #[test]
    fn domain_mismatch_rejected() {
        let inst = TspInstance::new("tri", vec![[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]], exact(12.0)).unwrap();
        let pi = ProblemInstance::Tsp(inst);
        assert!(matches!(
            evaluate(&pi, &Solution::new(Domain::Jssp, vec![0, 1, 2])),
            Err(ProblemError::DomainMismatch { .. })
        ));
        assert!(matches!(
            evaluate(&pi, &Solution::new(Domain::Tsp, vec![0, 1, 1])),
            Err(ProblemError::InvalidEncoding(_))
        ));
    }

    fn line_cvrp(demands: &[u32], capacity: u32) -> CvrpInstance {
        let n = demands.len() + 1;
        let coords = (0..n).map(|i| [i as f64, 0.0]).collect();
        let mut d = vec![0];
        d.extend_from_slice(demands);
        CvrpInstance::new("line", 0, coords, d, capacity, exact(1.0)).unwrap()
    }

    #[test]
    fn split_single_route() {
        let inst = line_cvrp(&[1, 1, 1, 1, 1], 10);
        let s = Solution::new(Domain::Cvrp, vec![1, 2, 3, 4, 5]);
        let report = check_feasible(&inst, &s);
        assert!(report.is_feasible());
        assert_eq!(report.num_routes(), 1);
    }

    #[test]
    fn split_each_customer_alone() {
        let inst = line_cvrp(&[2, 2, 2], 3);
        let s = Solution::new(Domain::Cvrp, vec![1, 2, 3]);
        let report = check_feasible(&inst, &s);
        assert!(report.is_feasible());
        assert_eq!(report.num_routes(), 3);
    }

    #[test]
    fn forced_split_reports_both_overloads() {
        let inst = line_cvrp(&[3, 3, 3, 3], 5);
        let report = check_routes(&inst, &[vec![1, 2], vec![3, 4]]);
        assert!(!report.is_feasible());
        let loads: Vec<u64> = report.violations.iter().map(|v| v.load).collect();
        assert_eq!(loads, vec![6, 6]);
        assert_eq!(report.violations[1].route, 1);
    }

    #[test]
    fn fused_cvrp_cost_matches_split_routes() {
        let inst = line_cvrp(&[3, 1, 4, 1, 5, 2], 6);
        let tour = [4u32, 2, 6, 1, 5, 3];
        let routes = greedy_split(&inst, &tour);
        let pi = ProblemInstance::Cvrp(inst.clone());
        assert_eq!(pi.cost(&tour), routes_length(&inst, &routes));
    }

    #[test]
    fn gap_formula() {
        assert_eq!(optimality_gap(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(optimality_gap(110.0, 100.0).unwrap(), 10.0);
        assert!(optimality_gap(90.0, 100.0).unwrap() < 0.0);
        assert!(matches!(optimality_gap(1.0, 0.0), Err(ProblemError::NonPositiveBks(_))));
    }

    #[test]
    fn lower_bound_holds_on_all_2x2_sequences() {
        let inst = two_by_two();
        for e in [[0, 0, 1, 1], [0, 1, 0, 1], [1, 1, 0, 0]] {
            assert!(jssp_makespan(&inst, &e) >= inst.trivial_lower_bound());
        }
    }
}
