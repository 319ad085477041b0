//! Exact single-vehicle pickup-and-delivery scheduling by dynamic programming.
//!
//! Each customer is in one of three states (waiting, onboard, dropped), so a
//! schedule state is a pair of bit masks plus the last visited stop. States are
//! expanded one stop at a time; labels reaching the same state are kept only
//! while they are Pareto-optimal in (cost, clock, pickup times of riders
//! onboard), which keeps the search exact under the wait and delay limits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{RequestId, TravelRequest};
use crate::network::{CostMatrix, Metric, NodeId, RoutingTables};

/// Customers a single schedule can hold (onboard plus pending).
pub const MAX_CUSTOMERS: usize = 8;
pub const DEFAULT_CAPACITY: usize = 4;
/// Safety margin (s) subtracted from every wait and delay limit so plans stay
/// feasible under floating-point re-accumulation of travel times.
pub const SCHEDULE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl std::fmt::Display for VehicleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Leg {
    pub time: f64,
    pub fuel: f64,
    pub distance: f64,
}

/// Travel costs between stops, possibly depending on how many passengers
/// ride on the leg (occupancy-dependent routing).
pub trait TravelCosts {
    fn leg(&self, from: NodeId, to: NodeId, occupancy: usize) -> Leg;

    /// Baseline ride time from which delay is measured: the time of the route
    /// a loaded vehicle would take.
    fn direct_time(&self, from: NodeId, to: NodeId) -> f64 {
        self.leg(from, to, 1).time
    }

    /// Lower bound on the time of any leg between the two nodes.
    fn min_time(&self, from: NodeId, to: NodeId) -> f64 {
        self.leg(from, to, 0).time
    }
}

impl TravelCosts for CostMatrix {
    fn leg(&self, from: NodeId, to: NodeId, _occupancy: usize) -> Leg {
        Leg { time: self.time(from, to), fuel: self.fuel(from, to), distance: self.distance(from, to) }
    }
}

/// Routes empty legs by one metric and loaded legs by another.
#[derive(Debug, Clone, Copy)]
pub struct PolicyCosts<'a> {
    pub tables: &'a RoutingTables,
    pub empty: Metric,
    pub loaded: Metric,
}

impl PolicyCosts<'_> {
    pub fn metric(&self, occupancy: usize) -> Metric {
        if occupancy == 0 {
            self.empty
        } else {
            self.loaded
        }
    }
}

impl TravelCosts for PolicyCosts<'_> {
    fn leg(&self, from: NodeId, to: NodeId, occupancy: usize) -> Leg {
        self.tables.get(self.metric(occupancy)).leg(from, to, occupancy)
    }

    fn min_time(&self, from: NodeId, to: NodeId) -> f64 {
        self.tables.fastest.time(from, to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Weighted customer time: waiting time plus `w_d` times ride time.
    #[default]
    Time,
    /// Fuel burnt driving between stops.
    Fuel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerParams {
    pub objective: Objective,
    /// Weight of onboard time relative to waiting time.
    pub w_d: f64,
    pub capacity: usize,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        Self { objective: Objective::Time, w_d: 1.0, capacity: DEFAULT_CAPACITY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnboardCustomer {
    pub request: TravelRequest,
    pub picked_up_at: f64,
}

/// Where and when a vehicle becomes free to follow a new schedule, and what it
/// is already committed to.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleStart {
    pub id: VehicleId,
    pub node: NodeId,
    pub time: f64,
    pub onboard: Vec<OnboardCustomer>,
    /// Assigned customers not yet picked up.
    pub assigned: Vec<TravelRequest>,
}

impl VehicleStart {
    pub fn idle(id: VehicleId, node: NodeId, time: f64) -> Self {
        Self { id, node, time, onboard: Vec::new(), assigned: Vec::new() }
    }

    pub fn committed(&self) -> usize {
        self.onboard.len() + self.assigned.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopKind {
    Pickup,
    Dropoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub node: NodeId,
    pub request: RequestId,
    pub kind: StopKind,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerTiming {
    pub request: RequestId,
    pub pickup_time: f64,
    pub dropoff_time: f64,
    pub wait: f64,
    pub delay: f64,
}

/// Ordered stops for one vehicle with the resulting customer times and totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripPlan {
    pub vehicle: VehicleId,
    pub start_node: NodeId,
    pub start_time: f64,
    pub stops: Vec<Stop>,
    /// One entry per customer in the schedule, sorted by request id.
    pub customers: Vec<CustomerTiming>,
    /// Weighted customer time of the schedule.
    pub time_cost: f64,
    /// Fuel (g) driving from the start through the last stop.
    pub fuel: f64,
    pub distance: f64,
    pub feasible: bool,
}

impl TripPlan {
    pub fn cost(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Time => self.time_cost,
            Objective::Fuel => self.fuel,
        }
    }

    pub fn end_time(&self) -> f64 {
        self.stops.last().map_or(self.start_time, |s| s.time)
    }

    pub fn end_node(&self) -> NodeId {
        self.stops.last().map_or(self.start_node, |s| s.node)
    }

    pub fn timing(&self, id: RequestId) -> Option<&CustomerTiming> {
        self.customers.iter().find(|c| c.request == id)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("{customers} customers ({onboard} onboard) exceed the schedule limits")]
    CapacityExceeded { customers: usize, onboard: usize },
    #[error("no stop order meets every wait and delay limit")]
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScheduleStats {
    /// Distinct (indicator vector, last stop) combinations reached.
    pub states: usize,
    /// Labels kept after dominance pruning.
    pub labels: usize,
}

struct Customer {
    id: RequestId,
    origin: NodeId,
    destination: NodeId,
    pickup_deadline: f64,
    request_time: f64,
    max_delay: f64,
    direct: f64,
    picked_up_at: Option<f64>,
}

#[derive(Clone, Copy)]
struct Label {
    cost: f64,
    time: f64,
    fuel: f64,
    distance: f64,
    picks: [f64; MAX_CUSTOMERS],
    arena: u32,
}

struct Step {
    stop: u8,
    parent: u32,
    time: f64,
}

const START: u32 = 0xff;

fn key(picked: u32, dropped: u32, last: u32) -> u32 {
    picked | dropped << 8 | last << 16
}

/// Returns the cost-optimal feasible schedule serving the vehicle's onboard
/// and assigned customers plus `new`.
pub fn solve_tsp_dp<C: TravelCosts + ?Sized>(
    vehicle: &VehicleStart,
    new: &[TravelRequest],
    costs: &C,
    params: &SchedulerParams,
) -> Result<TripPlan, ScheduleError> {
    solve_tsp_dp_with_stats(vehicle, new, costs, params).map(|(p, _)| p)
}

pub fn solve_tsp_dp_with_stats<C: TravelCosts + ?Sized>(
    vehicle: &VehicleStart,
    new: &[TravelRequest],
    costs: &C,
    params: &SchedulerParams,
) -> Result<(TripPlan, ScheduleStats), ScheduleError> {
    let onboard_count = vehicle.onboard.len();
    let n = onboard_count + vehicle.assigned.len() + new.len();
    if n > MAX_CUSTOMERS || onboard_count > params.capacity {
        return Err(ScheduleError::CapacityExceeded { customers: n, onboard: onboard_count });
    }
    let mut customers: Vec<Customer> = Vec::with_capacity(n);
    for o in &vehicle.onboard {
        let r = &o.request;
        customers.push(Customer {
            id: r.id,
            origin: r.origin,
            destination: r.destination,
            pickup_deadline: f64::INFINITY,
            request_time: r.request_time,
            max_delay: r.max_delay,
            direct: costs.direct_time(r.origin, r.destination),
            picked_up_at: Some(o.picked_up_at),
        });
    }
    for r in vehicle.assigned.iter().chain(new) {
        customers.push(Customer {
            id: r.id,
            origin: r.origin,
            destination: r.destination,
            pickup_deadline: r.request_time + r.max_wait - SCHEDULE_SLACK,
            request_time: r.request_time,
            max_delay: r.max_delay,
            direct: costs.direct_time(r.origin, r.destination),
            picked_up_at: None,
        });
    }
    let stop_node = |s: u32| -> NodeId {
        let c = &customers[(s / 2) as usize];
        if s % 2 == 0 {
            c.origin
        } else {
            c.destination
        }
    };
    let all = (1u32 << n) - 1;
    let initial_picked = (1u32 << onboard_count) - 1;

    let mut arena: Vec<Step> = vec![Step { stop: START as u8, parent: u32::MAX, time: vehicle.time }];
    let mut picks0 = [0.0; MAX_CUSTOMERS];
    for (i, c) in customers.iter().enumerate() {
        if let Some(p) = c.picked_up_at {
            picks0[i] = p;
        }
    }
    let mut layer: BTreeMap<u32, Vec<Label>> = BTreeMap::new();
    layer.insert(
        key(initial_picked, 0, START),
        vec![Label { cost: 0.0, time: vehicle.time, fuel: 0.0, distance: 0.0, picks: picks0, arena: 0 }],
    );
    let mut stats = ScheduleStats { states: 1, labels: 1 };
    let w_d = params.w_d;

    let layers = 2 * n - onboard_count;
    for _ in 0..layers {
        let mut next: BTreeMap<u32, Vec<Label>> = BTreeMap::new();
        for (&k, labels) in &layer {
            let picked = k & 0xff;
            let dropped = (k >> 8) & 0xff;
            let last = k >> 16;
            let from = if last == START { vehicle.node } else { stop_node(last) };
            let riding = picked & !dropped;
            let occupancy = riding.count_ones() as usize;
            let waiting = n - picked.count_ones() as usize;
            // Cost per second in this state: waiting customers accrue wait,
            // riders accrue weighted ride time.
            let rate = waiting as f64 + w_d * occupancy as f64;
            for i in 0..n as u32 {
                let bit = 1u32 << i;
                let (stop, npicked, ndropped) = if picked & bit == 0 {
                    if occupancy >= params.capacity {
                        continue;
                    }
                    (2 * i, picked | bit, dropped)
                } else if dropped & bit == 0 {
                    (2 * i + 1, picked, dropped | bit)
                } else {
                    continue;
                };
                let to = stop_node(stop);
                let leg = costs.leg(from, to, occupancy);
                let c = &customers[i as usize];
                let nk = key(npicked, ndropped, stop);
                for l in labels {
                    let t = l.time + leg.time;
                    let mut picks = l.picks;
                    if stop % 2 == 0 {
                        if t > c.pickup_deadline {
                            continue;
                        }
                        picks[i as usize] = t;
                    } else if t - l.picks[i as usize] - c.direct > c.max_delay - SCHEDULE_SLACK {
                        continue;
                    }
                    let step_cost = match params.objective {
                        Objective::Time => leg.time * rate,
                        Objective::Fuel => leg.fuel,
                    };
                    let cand = Label {
                        cost: l.cost + step_cost,
                        time: t,
                        fuel: l.fuel + leg.fuel,
                        distance: l.distance + leg.distance,
                        picks,
                        arena: 0,
                    };
                    let bucket = next.entry(nk).or_default();
                    let riders = npicked & !ndropped & !initial_picked;
                    let dominates = |a: &Label, b: &Label| {
                        a.cost <= b.cost
                            && a.time <= b.time
                            && (0..n).all(|j| riders >> j & 1 == 0 || a.picks[j] >= b.picks[j])
                    };
                    if bucket.iter().any(|b| dominates(b, &cand)) {
                        continue;
                    }
                    bucket.retain(|b| !dominates(&cand, b));
                    arena.push(Step { stop: stop as u8, parent: l.arena, time: t });
                    bucket.push(Label { arena: (arena.len() - 1) as u32, ..cand });
                }
            }
        }
        stats.states += next.len();
        stats.labels += next.values().map(Vec::len).sum::<usize>();
        layer = next;
        if layer.is_empty() {
            return Err(ScheduleError::Infeasible);
        }
    }

    let best = layer
        .iter()
        .filter(|(&k, _)| k & 0xffff == all | all << 8)
        .flat_map(|(_, ls)| ls.iter())
        .fold(None::<&Label>, |best, l| match best {
            Some(b) if b.cost <= l.cost => Some(b),
            _ => Some(l),
        })
        .ok_or(ScheduleError::Infeasible)?;

    let mut order = Vec::new();
    let mut cursor = best.arena;
    while cursor != 0 {
        let s = &arena[cursor as usize];
        order.push((s.stop as u32, s.time));
        cursor = s.parent;
    }
    order.reverse();
    let stops: Vec<Stop> = order
        .iter()
        .map(|&(s, time)| Stop {
            node: stop_node(s),
            request: customers[(s / 2) as usize].id,
            kind: if s % 2 == 0 { StopKind::Pickup } else { StopKind::Dropoff },
            time,
        })
        .collect();
    let mut timing: Vec<CustomerTiming> = customers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let pickup = c.picked_up_at.unwrap_or_else(|| order.iter().find(|o| o.0 == 2 * i as u32).unwrap().1);
            let dropoff = order.iter().find(|o| o.0 == 2 * i as u32 + 1).unwrap().1;
            CustomerTiming {
                request: c.id,
                pickup_time: pickup,
                dropoff_time: dropoff,
                wait: pickup - c.request_time,
                delay: dropoff - pickup - c.direct,
            }
        })
        .collect();
    timing.sort_by_key(|t| t.request);
    let time_cost = match params.objective {
        Objective::Time => best.cost,
        Objective::Fuel => weighted_time(vehicle.time, &stops, &customers, onboard_count, w_d),
    };
    Ok((
        TripPlan {
            vehicle: vehicle.id,
            start_node: vehicle.node,
            start_time: vehicle.time,
            stops,
            customers: timing,
            time_cost,
            fuel: best.fuel,
            distance: best.distance,
            feasible: true,
        },
        stats,
    ))
}

/// Weighted customer time of a stop sequence (used to report the time cost of
/// fuel-optimal plans).
fn weighted_time(start: f64, stops: &[Stop], customers: &[Customer], onboard: usize, w_d: f64) -> f64 {
    let n = customers.len();
    let mut waiting = n - onboard;
    let mut riding = onboard;
    let mut t = start;
    let mut total = 0.0;
    for s in stops {
        total += (s.time - t) * (waiting as f64 + w_d * riding as f64);
        t = s.time;
        match s.kind {
            StopKind::Pickup => {
                waiting -= 1;
                riding += 1;
            }
            StopKind::Dropoff => riding -= 1,
        }
    }
    total
}
