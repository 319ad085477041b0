//! Trip selection: solve each clique's schedule, pick a conflict-free set of
//! trips by 0-1 programming, then send idle vehicles toward customers the
//! selection had to leave out.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::demand::{RequestId, TravelRequest};
use crate::network::NodeId;
use crate::optim::{min_cost_matching, solve_01_ilp, Constraint, OptimError, ZeroOneProgram};
use crate::scheduler::{solve_tsp_dp, SchedulerParams, TravelCosts, TripPlan, VehicleId, VehicleStart};
use crate::shareability::{build_graph, enumerate_cliques, Clique};

/// A clique whose schedule meets every limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleTrip {
    pub id: usize,
    pub vehicle: VehicleId,
    /// New requests the trip adds to the vehicle.
    pub requests: Vec<RequestId>,
    pub plan: TripPlan,
    /// Increase of the vehicle's schedule cost over its current commitments
    /// (the full plan cost for a vehicle with no commitments).
    pub cost: f64,
}

/// Solves the schedule of every clique and keeps the feasible ones.
///
/// A vehicle whose current commitments are themselves unschedulable gets no
/// trips (it keeps its running plan).
pub fn build_trips<C: TravelCosts + ?Sized>(
    cliques: &[Clique],
    vehicles: &[VehicleStart],
    requests: &[TravelRequest],
    costs: &C,
    params: &SchedulerParams,
) -> Vec<FeasibleTrip> {
    let by_id: BTreeMap<RequestId, &TravelRequest> = requests.iter().map(|r| (r.id, r)).collect();
    let vehicle_by_id: BTreeMap<VehicleId, &VehicleStart> = vehicles.iter().map(|v| (v.id, v)).collect();
    let mut base: BTreeMap<VehicleId, Option<f64>> = BTreeMap::new();
    let mut out = Vec::new();
    for clique in cliques {
        let Some(&vehicle) = vehicle_by_id.get(&clique.vehicle) else { continue };
        let status_quo = *base
            .entry(vehicle.id)
            .or_insert_with(|| solve_tsp_dp(vehicle, &[], costs, params).ok().map(|p| p.cost(params.objective)));
        let Some(status_quo) = status_quo else { continue };
        let new: Vec<TravelRequest> = clique.requests.iter().filter_map(|id| by_id.get(id).map(|r| (*r).clone())).collect();
        if new.len() != clique.requests.len() {
            continue;
        }
        if let Ok(plan) = solve_tsp_dp(vehicle, &new, costs, params) {
            let cost = (plan.cost(params.objective) - status_quo).max(0.0);
            out.push(FeasibleTrip { id: out.len(), vehicle: vehicle.id, requests: clique.requests.clone(), plan, cost });
        }
    }
    out
}

/// Trips, customers and the penalty for leaving a customer unserved.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub trips: Vec<FeasibleTrip>,
    pub customers: Vec<RequestId>,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSolution {
    /// Indices into the problem's trip list.
    pub selected: Vec<usize>,
    pub ignored: Vec<RequestId>,
    pub objective: f64,
}

impl AssignmentProblem {
    /// Sets the penalty to `10 * max trip cost + 1`, raised when needed to
    /// exceed the summed costliest trip of every vehicle, so serving one more
    /// customer always beats any cost saving.
    pub fn new(trips: Vec<FeasibleTrip>, customers: Vec<RequestId>) -> Self {
        let max = trips.iter().map(|t| t.cost).fold(0.0, f64::max);
        let mut per_vehicle: BTreeMap<VehicleId, f64> = BTreeMap::new();
        for t in &trips {
            let e = per_vehicle.entry(t.vehicle).or_insert(0.0);
            *e = e.max(t.cost);
        }
        let total: f64 = per_vehicle.values().sum();
        let penalty = (10.0 * max + 1.0).max(total + 1.0);
        Self { trips, customers, penalty }
    }

    /// Objective of a selection: trip costs plus the penalty per customer no
    /// selected trip serves.
    pub fn objective(&self, selected: &[usize]) -> f64 {
        let served: BTreeSet<RequestId> = selected.iter().flat_map(|&i| self.trips[i].requests.iter().copied()).collect();
        let unserved = self.customers.iter().filter(|c| !served.contains(c)).count();
        selected.iter().map(|&i| self.trips[i].cost).sum::<f64>() + self.penalty * unserved as f64
    }

    /// Whether no vehicle and no customer appears in two selected trips.
    pub fn is_valid(&self, selected: &[usize]) -> bool {
        let mut vehicles = BTreeSet::new();
        let mut customers = BTreeSet::new();
        selected.iter().all(|&i| {
            let t = &self.trips[i];
            vehicles.insert(t.vehicle) && t.requests.iter().all(|r| customers.insert(*r))
        })
    }

    /// Variables: one per trip, then one "ignored" indicator per customer.
    pub fn to_program(&self) -> ZeroOneProgram {
        let m = self.trips.len();
        let mut costs: Vec<f64> = self.trips.iter().map(|t| t.cost).collect();
        costs.extend(std::iter::repeat_n(self.penalty, self.customers.len()));
        let mut by_vehicle: BTreeMap<VehicleId, Vec<(usize, f64)>> = BTreeMap::new();
        let mut by_customer: BTreeMap<RequestId, Vec<(usize, f64)>> = BTreeMap::new();
        for (i, t) in self.trips.iter().enumerate() {
            by_vehicle.entry(t.vehicle).or_default().push((i, 1.0));
            for r in &t.requests {
                by_customer.entry(*r).or_default().push((i, 1.0));
            }
        }
        let le = by_vehicle.into_values().map(|c| Constraint::new(c, 1.0)).collect();
        let eq = self
            .customers
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let mut coefs = by_customer.remove(c).unwrap_or_default();
                coefs.push((m + j, 1.0));
                Constraint::new(coefs, 1.0)
            })
            .collect();
        ZeroOneProgram { costs, le, eq }
    }
}

/// Optimal conflict-free trip selection.
pub fn solve_ilp(problem: &AssignmentProblem) -> Result<AssignmentSolution, OptimError> {
    let program = problem.to_program();
    let sol = solve_01_ilp(&program)?;
    let m = problem.trips.len();
    let selected: Vec<usize> = (0..m).filter(|&i| sol.x[i]).collect();
    let ignored: Vec<RequestId> = problem.customers.iter().enumerate().filter(|(j, _)| sol.x[m + j]).map(|(_, c)| *c).collect();
    debug_assert!(problem.is_valid(&selected));
    Ok(AssignmentSolution { objective: problem.objective(&selected), selected, ignored })
}

/// An idle vehicle available for passive rebalancing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdleVehicle {
    pub id: VehicleId,
    pub node: NodeId,
    pub time: f64,
}

/// Matches idle vehicles one-to-one to ignored customers minimizing the total
/// time to reach the customers' origins (empty legs). Returns pairs sorted by
/// vehicle id.
pub fn passive_rebalance<C: TravelCosts + ?Sized>(
    ignored: &[TravelRequest],
    idle: &[IdleVehicle],
    costs: &C,
) -> Vec<(VehicleId, RequestId)> {
    if ignored.is_empty() || idle.is_empty() {
        return Vec::new();
    }
    let matrix: Vec<Vec<Option<f64>>> =
        idle.iter().map(|v| ignored.iter().map(|r| Some(costs.leg(v.node, r.origin, 0).time)).collect()).collect();
    let mut pairs: Vec<(VehicleId, RequestId)> =
        min_cost_matching(&matrix).into_iter().map(|(vi, ri)| (idle[vi].id, ignored[ri].id)).collect();
    pairs.sort();
    pairs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchOptions {
    pub scheduler: SchedulerParams,
    /// Keep at most this many vehicle edges per request (nearest first).
    pub max_vehicles_per_request: Option<usize>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { scheduler: SchedulerParams::default(), max_vehicles_per_request: Some(12) }
    }
}

/// Everything one assignment interval decided.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub rr_edges: usize,
    pub rv_edges: usize,
    pub cliques: usize,
    pub trips: Vec<FeasibleTrip>,
    pub solution: AssignmentSolution,
    /// Selected trips' new plans, one per vehicle.
    pub plans: BTreeMap<VehicleId, TripPlan>,
}

/// Runs one assignment interval over `requests` (pending and not yet assigned)
/// and `vehicles` (all vehicles with their commitments).
pub fn assign_batch<C: TravelCosts + ?Sized>(
    requests: &[TravelRequest],
    vehicles: &[VehicleStart],
    costs: &C,
    clock: f64,
    options: &BatchOptions,
) -> Result<BatchResult, OptimError> {
    let params = &options.scheduler;
    let graph = build_graph(requests, vehicles, costs, clock, params, options.max_vehicles_per_request);
    let cliques = enumerate_cliques(&graph, params.capacity);
    let trips = build_trips(&cliques, vehicles, requests, costs, params);
    let problem = AssignmentProblem::new(trips, requests.iter().map(|r| r.id).collect());
    let solution = solve_ilp(&problem)?;
    let plans = solution.selected.iter().map(|&i| (problem.trips[i].vehicle, problem.trips[i].plan.clone())).collect();
    Ok(BatchResult {
        rr_edges: graph.rr_edge_count(),
        rv_edges: graph.rv_edge_count(),
        cliques: cliques.len(),
        trips: problem.trips,
        solution,
        plans,
    })
}
