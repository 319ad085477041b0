use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Scenario, SimConfig, Strategy, TripPhase};
use super::events::{Event, EventKind, EventLog};
use super::metrics::{MetricsReport, Spread};
use super::SimError;
use crate::assignment::{assign_batch, passive_rebalance, BatchOptions, IdleVehicle};
use crate::demand::{RequestId, TravelRequest};
use crate::network::{EdgeId, Metric, NodeId};
use crate::pool::{CustomerPool, PoolEvent, RequestState};
use crate::rebalance::{plan_rebalance, rounding_seed, BusyVehicle, RebalanceContext, RebalanceProblem};
use crate::scheduler::{OnboardCustomer, PolicyCosts, SchedulerParams, Stop, StopKind, TravelCosts, VehicleId, VehicleStart};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleStatus {
    Idle,
    /// Following an assigned trip plan.
    Serving,
    /// Driving empty toward an ignored customer's origin.
    PassiveRebalance { request: RequestId, target: NodeId },
    /// Relocating toward a partition center.
    ActiveRebalance { target: NodeId },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Odometer {
    pub distance: f64,
    pub empty_distance: f64,
    pub fuel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    /// The node the vehicle stands at or, when on an edge, the edge's end.
    pub node: NodeId,
    /// Edge being traversed and the time the vehicle reaches its end.
    pub edge: Option<(EdgeId, f64)>,
    pub status: VehicleStatus,
    pub onboard: Vec<OnboardCustomer>,
    /// Assigned customers not yet picked up.
    pub assigned: Vec<TravelRequest>,
    /// Remaining stops of the committed plan.
    pub stops: VecDeque<Stop>,
    pub odometer: Odometer,
}

impl Vehicle {
    fn new(id: VehicleId, node: NodeId) -> Self {
        Self {
            id,
            node,
            edge: None,
            status: VehicleStatus::Idle,
            onboard: Vec::new(),
            assigned: Vec::new(),
            stops: VecDeque::new(),
            odometer: Odometer::default(),
        }
    }

    /// When the vehicle is free to start a new route from `node`.
    pub fn free_at(&self, clock: f64) -> f64 {
        self.edge.map_or(clock, |(_, at)| at)
    }

    fn start(&self, clock: f64) -> VehicleStart {
        VehicleStart {
            id: self.id,
            node: self.node,
            time: self.free_at(clock),
            onboard: self.onboard.clone(),
            assigned: self.assigned.clone(),
        }
    }

    fn is_idle(&self) -> bool {
        self.status == VehicleStatus::Idle
    }
}

#[derive(Debug, Default)]
struct WindowStats {
    fuel: f64,
    distance: f64,
    empty_distance: f64,
    dropoffs: usize,
    committed_sum: f64,
    onboard_sum: f64,
    samples: usize,
}

/// Mutable simulation state: fleet, customer pool, clock and event log.
pub struct World<'a> {
    scenario: &'a Scenario,
    config: SimConfig,
    strategy: Strategy,
    seed: u64,
    pub clock: f64,
    pub vehicles: Vec<Vehicle>,
    pub pool: CustomerPool,
    requests: Vec<TravelRequest>,
    next_request: usize,
    log: EventLog,
    passive_targets: BTreeSet<RequestId>,
    intervals: u64,
    stats: WindowStats,
    max_occupancy: usize,
}

impl<'a> World<'a> {
    /// Places `config.fleet_size` vehicles on random nodes drawn from `seed`.
    pub fn new(scenario: &'a Scenario, config: &SimConfig, requests: Vec<TravelRequest>, seed: u64) -> Result<Self, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f1ee7);
        let n = scenario.network.node_count() as u32;
        let starts = (0..config.fleet_size).map(|_| NodeId(rng.random_range(0..n))).collect();
        Self::with_fleet(scenario, config, requests, starts, seed)
    }

    /// One vehicle per entry of `starts`, ids in order.
    pub fn with_fleet(
        scenario: &'a Scenario,
        config: &SimConfig,
        mut requests: Vec<TravelRequest>,
        starts: Vec<NodeId>,
        seed: u64,
    ) -> Result<Self, SimError> {
        config.validate()?;
        let strategy = Strategy::get(config.configuration)?;
        for &s in &starts {
            scenario.network.check_node(s)?;
        }
        for r in &requests {
            r.validate()?;
            scenario.network.check_node(r.origin)?;
            scenario.network.check_node(r.destination)?;
        }
        requests.sort_by(|a, b| a.request_time.total_cmp(&b.request_time).then(a.id.cmp(&b.id)));
        let vehicles = starts.into_iter().enumerate().map(|(i, n)| Vehicle::new(VehicleId(i as u32), n)).collect();
        Ok(Self {
            scenario,
            config: config.clone(),
            strategy,
            seed,
            clock: 0.0,
            vehicles,
            pool: CustomerPool::new(),
            requests,
            next_request: 0,
            log: EventLog::default(),
            passive_targets: BTreeSet::new(),
            intervals: 0,
            stats: WindowStats::default(),
            max_occupancy: 0,
        })
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn into_log(self) -> EventLog {
        self.log
    }

    fn assignment_costs(&self) -> PolicyCosts<'a> {
        PolicyCosts {
            tables: &self.scenario.tables,
            empty: self.strategy.routing_policy(0, TripPhase::Assignment),
            loaded: self.strategy.routing_policy(1, TripPhase::Assignment),
        }
    }

    fn in_window(&self, t: f64) -> bool {
        t >= self.config.warmup && t < self.config.horizon
    }

    /// Runs assignment intervals and motion steps until the horizon has passed
    /// and every customer is resolved, or the drain limit is hit.
    pub fn run(&mut self) -> Result<(), SimError> {
        let per_interval = (self.config.interval / self.config.dt).round() as u64;
        let end = self.config.horizon + self.config.drain_limit;
        let mut step: u64 = 0;
        loop {
            self.clock = step as f64 * self.config.dt;
            if step % per_interval == 0 {
                let done = self.next_request == self.requests.len() && self.pool.pending_count() == 0;
                if self.clock >= end || (self.clock >= self.config.horizon && done) {
                    return Ok(());
                }
                self.admit_requests()?;
                self.on_interval()?;
            }
            self.step(self.config.dt)?;
            step += 1;
        }
    }

    /// Advances every vehicle by `dt`, firing edge completions, pickups and
    /// drop-offs at their exact times, then admits requests made so far.
    pub fn step(&mut self, dt: f64) -> Result<(), SimError> {
        let until = self.clock + dt;
        for i in 0..self.vehicles.len() {
            self.advance(i, until)?;
        }
        self.clock = until;
        self.admit_requests()?;
        Ok(())
    }

    fn admit_requests(&mut self) -> Result<(), SimError> {
        while let Some(r) = self.requests.get(self.next_request) {
            if r.request_time > self.clock {
                break;
            }
            let r = r.clone();
            self.next_request += 1;
            self.log.push(Event { request: Some(r.id), node: Some(r.origin), ..Event::new(r.request_time, EventKind::Request) });
            self.pool.insert(r)?;
        }
        Ok(())
    }

    fn advance(&mut self, i: usize, until: f64) -> Result<(), SimError> {
        loop {
            let now = match self.vehicles[i].edge {
                Some((e, at)) => {
                    if at > until {
                        return Ok(());
                    }
                    self.finish_edge(i, e, at);
                    at
                }
                None => self.clock,
            };
            self.serve_stops(i, now)?;
            let Some((target, metric)) = self.next_target(i) else {
                return Ok(());
            };
            let v = &mut self.vehicles[i];
            let e = self.scenario.tables.get(metric).next_edge(v.node, target).expect("network is strongly connected");
            let edge = self.scenario.network.edge(e);
            v.node = edge.to;
            v.edge = Some((e, now + edge.travel_time()));
        }
    }

    fn finish_edge(&mut self, i: usize, e: EdgeId, at: f64) {
        let net = &self.scenario.network;
        let edge = net.edge(e);
        let fuel = net.edge_fuel(e);
        let v = &mut self.vehicles[i];
        let empty = v.onboard.is_empty();
        v.odometer.fuel += fuel;
        v.odometer.distance += edge.length;
        if empty {
            v.odometer.empty_distance += edge.length;
        }
        v.edge = None;
        let id = v.id;
        if self.in_window(at) {
            self.stats.fuel += fuel;
            self.stats.distance += edge.length;
            if empty {
                self.stats.empty_distance += edge.length;
            }
        }
        self.log.push(Event {
            vehicle: Some(id),
            edge: Some(e),
            node: Some(edge.to),
            fuel: Some(fuel),
            distance: Some(edge.length),
            empty: Some(empty),
            ..Event::new(at, EventKind::Edge)
        });
    }

    fn serve_stops(&mut self, i: usize, now: f64) -> Result<(), SimError> {
        while self.vehicles[i].stops.front().is_some_and(|s| s.node == self.vehicles[i].node) {
            let v = &mut self.vehicles[i];
            let stop = v.stops.pop_front().expect("front exists");
            let id = v.id;
            match stop.kind {
                StopKind::Pickup => {
                    let k = v.assigned.iter().position(|r| r.id == stop.request).expect("pickup of an assigned customer");
                    let request = v.assigned.remove(k);
                    v.onboard.push(OnboardCustomer { request, picked_up_at: now });
                    self.max_occupancy = self.max_occupancy.max(v.onboard.len());
                    self.pool.apply(stop.request, PoolEvent::Pickup, now)?;
                }
                StopKind::Dropoff => {
                    let k = v.onboard.iter().position(|c| c.request.id == stop.request).expect("drop-off of an onboard customer");
                    v.onboard.remove(k);
                    self.pool.apply(stop.request, PoolEvent::Complete, now)?;
                    if self.in_window(now) {
                        self.stats.dropoffs += 1;
                    }
                }
            }
            let kind = if stop.kind == StopKind::Pickup { EventKind::Pickup } else { EventKind::Dropoff };
            self.log.push(Event { vehicle: Some(id), request: Some(stop.request), node: Some(stop.node), ..Event::new(now, kind) });
        }
        let v = &mut self.vehicles[i];
        if v.status == VehicleStatus::Serving && v.stops.is_empty() {
            v.status = VehicleStatus::Idle;
        }
        Ok(())
    }

    fn next_target(&mut self, i: usize) -> Option<(NodeId, Metric)> {
        let v = &mut self.vehicles[i];
        if let Some(s) = v.stops.front() {
            return Some((s.node, self.strategy.routing_policy(v.onboard.len(), TripPhase::Assignment)));
        }
        let (target, phase) = match v.status {
            VehicleStatus::PassiveRebalance { target, .. } => (target, TripPhase::PassiveRebalance),
            VehicleStatus::ActiveRebalance { target } => (target, TripPhase::ActiveRebalance),
            VehicleStatus::Idle | VehicleStatus::Serving => return None,
        };
        if v.node == target {
            if let VehicleStatus::PassiveRebalance { request, .. } = v.status {
                self.passive_targets.remove(&request);
            }
            v.status = VehicleStatus::Idle;
            return None;
        }
        Some((target, self.strategy.routing_policy(0, phase)))
    }

    /// One assignment interval at the current clock: trip assignment, passive
    /// rebalancing, rejection of customers that can no longer be reached,
    /// active rebalancing and fleet sampling.
    pub fn on_interval(&mut self) -> Result<(), SimError> {
        let clock = self.clock;
        self.assign(clock)?;
        self.release_passive();
        if self.config.passive_rebalance {
            self.passive(clock);
        }
        self.reject_expired(clock)?;
        if self.config.active_rebalance && clock < self.config.horizon {
            self.active(clock)?;
        }
        if self.in_window(clock) {
            for v in self.vehicles.iter().filter(|v| v.status == VehicleStatus::Serving) {
                self.stats.samples += 1;
                self.stats.committed_sum += (v.onboard.len() + v.assigned.len()) as f64;
                self.stats.onboard_sum += v.onboard.len() as f64;
            }
        }
        self.intervals += 1;
        Ok(())
    }

    fn waiting(&self) -> Vec<TravelRequest> {
        self.pool.pending().filter(|e| e.state == RequestState::Waiting).map(|e| e.request.clone()).collect()
    }

    fn assign(&mut self, clock: f64) -> Result<(), SimError> {
        let waiting = self.waiting();
        if waiting.is_empty() {
            return Ok(());
        }
        let starts: Vec<VehicleStart> = self.vehicles.iter().map(|v| v.start(clock)).collect();
        let options = BatchOptions {
            scheduler: SchedulerParams { objective: self.strategy.objective, w_d: self.config.w_d, capacity: self.config.capacity },
            max_vehicles_per_request: self.config.max_vehicles_per_request,
        };
        let batch = assign_batch(&waiting, &starts, &self.assignment_costs(), clock, &options)?;
        for (vid, plan) in batch.plans {
            let v = &mut self.vehicles[vid.0 as usize];
            let known: BTreeSet<RequestId> = v.onboard.iter().map(|c| c.request.id).chain(v.assigned.iter().map(|r| r.id)).collect();
            for c in &plan.customers {
                if known.contains(&c.request) {
                    continue;
                }
                let r = waiting.iter().find(|r| r.id == c.request).expect("plan customer is waiting").clone();
                self.pool.apply(r.id, PoolEvent::Assign(vid), clock)?;
                self.log.push(Event { vehicle: Some(vid), request: Some(r.id), ..Event::new(clock, EventKind::Assign) });
                v.assigned.push(r);
            }
            if let VehicleStatus::PassiveRebalance { request, .. } = v.status {
                self.passive_targets.remove(&request);
            }
            v.stops = plan.stops.into();
            v.status = VehicleStatus::Serving;
        }
        Ok(())
    }

    /// Stops relocations toward customers that were assigned or rejected.
    fn release_passive(&mut self) {
        for v in &mut self.vehicles {
            if let VehicleStatus::PassiveRebalance { request, .. } = v.status {
                if self.pool.state(request) != Some(RequestState::Waiting) {
                    self.passive_targets.remove(&request);
                    v.status = VehicleStatus::Idle;
                }
            }
        }
    }

    fn passive(&mut self, clock: f64) {
        let ignored: Vec<TravelRequest> =
            self.waiting().into_iter().filter(|r| !self.passive_targets.contains(&r.id)).collect();
        let idle: Vec<IdleVehicle> = self
            .vehicles
            .iter()
            .filter(|v| matches!(v.status, VehicleStatus::Idle | VehicleStatus::ActiveRebalance { .. }))
            .map(|v| IdleVehicle { id: v.id, node: v.node, time: v.free_at(clock) })
            .collect();
        let metric = self.strategy.routing_policy(0, TripPhase::PassiveRebalance);
        let costs = self.scenario.tables.get(metric);
        for (vid, rid) in passive_rebalance(&ignored, &idle, costs) {
            let r = ignored.iter().find(|r| r.id == rid).expect("matched customer");
            let v = &mut self.vehicles[vid.0 as usize];
            // Pointless if the vehicle cannot reach the customer in time.
            if v.free_at(clock) + costs.leg(v.node, r.origin, 0).time > r.pickup_deadline() {
                continue;
            }
            v.status = VehicleStatus::PassiveRebalance { request: rid, target: r.origin };
            self.passive_targets.insert(rid);
            self.log.push(Event {
                vehicle: Some(vid),
                request: Some(rid),
                node: Some(r.origin),
                ..Event::new(clock, EventKind::PassiveRebalance)
            });
        }
    }

    /// Rejects waiting customers whose pickup deadline passes before the next
    /// interval.
    fn reject_expired(&mut self, clock: f64) -> Result<(), SimError> {
        let next = clock + self.config.interval;
        for r in self.waiting() {
            if r.pickup_deadline() < next {
                self.pool.apply(r.id, PoolEvent::Reject, clock)?;
                self.log.push(Event { request: Some(r.id), ..Event::new(clock, EventKind::Reject) });
            }
        }
        Ok(())
    }

    fn active(&mut self, clock: f64) -> Result<(), SimError> {
        let demand = &self.scenario.demand;
        if !(demand.total_rate() > 0.0) {
            return Ok(());
        }
        let idle: Vec<(VehicleId, NodeId)> = self.vehicles.iter().filter(|v| v.is_idle()).map(|v| (v.id, v.node)).collect();
        if idle.is_empty() {
            return Ok(());
        }
        let tables = &self.scenario.tables;
        let busy: Vec<BusyVehicle> = self
            .vehicles
            .iter()
            .filter(|v| !v.is_idle())
            .map(|v| {
                let t0 = v.free_at(clock);
                match v.status {
                    VehicleStatus::Serving => {
                        let last = v.stops.back().expect("serving vehicles have stops");
                        BusyVehicle { node: last.node, free_at: last.time }
                    }
                    VehicleStatus::PassiveRebalance { target, .. } => {
                        let metric = self.strategy.routing_policy(0, TripPhase::PassiveRebalance);
                        BusyVehicle { node: target, free_at: t0 + tables.get(metric).time(v.node, target) }
                    }
                    VehicleStatus::ActiveRebalance { target } => {
                        BusyVehicle { node: target, free_at: t0 + tables.eco.time(v.node, target) }
                    }
                    VehicleStatus::Idle => unreachable!(),
                }
            })
            .collect();
        let density = demand.origin_density();
        let rates: Vec<f64> = demand.rates.iter().map(|r| r * self.config.demand_ratio).collect();
        let ctx = RebalanceContext {
            partitions: &self.scenario.partitions,
            eco: &tables.eco,
            origin_density: &density,
            request_rates: &rates,
        };
        let problem = RebalanceProblem::build(&ctx, &idle, &busy, clock, &self.config.rebalance_params());
        let plan = plan_rebalance(&problem, rounding_seed(self.seed, self.intervals))?;
        for (vid, target) in plan.moves() {
            self.vehicles[vid.0 as usize].status = VehicleStatus::ActiveRebalance { target };
            self.log.push(Event { vehicle: Some(vid), node: Some(target), ..Event::new(clock, EventKind::ActiveRebalance) });
        }
        Ok(())
    }

    /// Metrics of the run so far.
    pub fn report(&self, seed: u64) -> MetricsReport {
        let costs = self.assignment_costs();
        let mut waits = Vec::new();
        let mut delays = Vec::new();
        let (mut requests, mut served, mut rejected, mut within) = (0, 0, 0, 0);
        let (mut total_served, mut total_rejected, mut violations) = (0, 0, 0);
        for e in self.pool.entries() {
            let r = &e.request;
            let window = self.in_window(r.request_time);
            requests += window as usize;
            match e.state {
                RequestState::Completed => {
                    let pickup = e.pickup_time.expect("completed customers were picked up");
                    let wait = pickup - r.request_time;
                    let delay = e.dropoff_time.expect("completed") - pickup - costs.direct_time(r.origin, r.destination);
                    let ok = wait <= r.max_wait && delay <= r.max_delay;
                    total_served += 1;
                    violations += !ok as usize;
                    if window {
                        served += 1;
                        within += ok as usize;
                        waits.push(wait);
                        delays.push(delay);
                    }
                }
                RequestState::Rejected => {
                    total_rejected += 1;
                    rejected += window as usize;
                }
                _ => {}
            }
        }
        // Requests never admitted (run stopped early) count as pending.
        for r in &self.requests[self.next_request..] {
            requests += self.in_window(r.request_time) as usize;
        }
        let total_requests = self.requests.len();
        let wait = Spread::of(waits);
        let delay = Spread::of(delays);
        let s = &self.stats;
        let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
        let fleet = self.vehicles.iter().fold(Odometer::default(), |acc, v| Odometer {
            distance: acc.distance + v.odometer.distance,
            empty_distance: acc.empty_distance + v.odometer.empty_distance,
            fuel: acc.fuel + v.odometer.fuel,
        });
        MetricsReport {
            configuration: self.config.configuration,
            fleet_size: self.vehicles.len(),
            seed,
            requests,
            served,
            rejected,
            pending: requests - served - rejected,
            served_ratio: ratio(within as f64, requests as f64),
            wait_mean: wait.mean,
            wait_p25: wait.p25,
            wait_p75: wait.p75,
            delay_mean: delay.mean,
            delay_p25: delay.p25,
            delay_p75: delay.p75,
            fleet_fuel: s.fuel,
            fuel_per_customer: ratio(s.fuel, s.dropoffs as f64),
            empty_ratio: ratio(s.empty_distance, s.distance),
            assigned_per_vehicle: ratio(s.committed_sum, s.samples as f64),
            onboard_per_vehicle: ratio(s.onboard_sum, s.samples as f64),
            baseline_fuel_delta: None,
            violations,
            max_occupancy: self.max_occupancy,
            total_requests,
            total_served,
            total_rejected,
            total_pending: total_requests - total_served - total_rejected,
            total_fuel: fleet.fuel,
            total_distance: fleet.distance,
            total_empty_distance: fleet.empty_distance,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::DemandModel;
    use crate::network::test_util::line;
    use crate::network::{generate_grid, GridSpec, RoadNetwork};
    use crate::sim::config::standard_demand;
    use crate::sim::run_scenario;

    fn line_scenario(net: RoadNetwork) -> Scenario {
        Scenario::new(net, 1, DemandModel::with_uniform_destinations(vec![0.0])).unwrap()
    }

    fn request(id: u32, o: u32, d: u32, t: f64) -> TravelRequest {
        TravelRequest { id: RequestId(id), origin: NodeId(o), destination: NodeId(d), request_time: t, max_wait: 300.0, max_delay: 300.0 }
    }

    fn quiet() -> SimConfig {
        SimConfig { horizon: 600.0, warmup: 0.0, active_rebalance: false, drain_limit: 600.0, ..Default::default() }
    }

    #[test]
    fn stop_fires_after_edge_time() {
        // 100 m at 10 m/s: the pickup at node 1 happens exactly 10 s in.
        let sc = line_scenario(line(&[(100.0, 10.0), (100.0, 10.0)]));
        let cfg = SimConfig { dt: 10.0, ..quiet() };
        let mut w = World::with_fleet(&sc, &cfg, vec![request(0, 1, 2, 0.0)], vec![NodeId(0)], 1).unwrap();
        w.admit_requests().unwrap();
        w.on_interval().unwrap();
        assert_eq!(w.vehicles[0].status, VehicleStatus::Serving);
        w.step(10.0).unwrap();
        assert_eq!(w.clock, 10.0);
        assert_eq!(w.pool.state(RequestId(0)), Some(RequestState::Onboard));
        let pickup = w.log().of_kind(EventKind::Pickup).next().unwrap().clone();
        assert_eq!(pickup.t, 10.0);
        assert_eq!(w.vehicles[0].odometer.empty_distance, 100.0);
        w.step(10.0).unwrap();
        assert_eq!(w.pool.state(RequestId(0)), Some(RequestState::Completed));
        assert_eq!(w.vehicles[0].odometer.distance, 200.0);
        assert_eq!(w.vehicles[0].odometer.empty_distance, 100.0);
        assert_eq!(w.vehicles[0].status, VehicleStatus::Idle);
    }

    #[test]
    fn idle_fleet_without_demand_only_moves_the_clock() {
        let net = generate_grid(&GridSpec { cols: 4, rows: 4, ..Default::default() }, 1).unwrap();
        let sc = Scenario::new(net, 9, standard_demand(0.0)).unwrap();
        let cfg = SimConfig { fleet_size: 5, horizon: 300.0, warmup: 0.0, ..Default::default() };
        let mut w = World::new(&sc, &cfg, Vec::new(), 3).unwrap();
        let before = w.vehicles.clone();
        for _ in 0..40 {
            if (w.clock / cfg.interval).fract() == 0.0 {
                w.on_interval().unwrap();
            }
            w.step(cfg.dt).unwrap();
        }
        assert_eq!(w.clock, 40.0);
        assert_eq!(w.vehicles, before);
        assert!(w.log().is_empty());
    }

    #[test]
    fn adjacent_vehicle_wait_is_the_approach_time() {
        let net = generate_grid(&GridSpec { cols: 5, rows: 5, ..Default::default() }, 4).unwrap();
        let sc = Scenario::new(net, 1, DemandModel::with_uniform_destinations(vec![0.0])).unwrap();
        for configuration in 1..=8u8 {
            let cfg = SimConfig { configuration, ..quiet() };
            // Vehicle at node 0, customer at its east neighbor.
            let w0 = World::with_fleet(&sc, &cfg, vec![request(0, 1, 24, 0.0)], vec![NodeId(0)], 1).unwrap();
            let approach_metric = w0.strategy.routing_policy(0, TripPhase::Assignment);
            let expected = sc.tables.get(approach_metric).time(NodeId(0), NodeId(1));
            let mut w = w0;
            w.run().unwrap();
            let e = w.pool.get(RequestId(0)).unwrap();
            assert_eq!(e.state, RequestState::Completed, "config {configuration}");
            assert!((e.pickup_time.unwrap() - expected).abs() < 1e-9, "config {configuration}");
        }
    }

    #[test]
    fn single_run_conserves_customers_and_fuel() {
        let net = generate_grid(&GridSpec { cols: 8, rows: 8, ..Default::default() }, 2).unwrap();
        let sc = Scenario::new(net, 9, standard_demand(400.0)).unwrap();
        for configuration in [1, 6, 8] {
            let cfg = SimConfig { configuration, fleet_size: 8, horizon: 1200.0, warmup: 400.0, ..Default::default() };
            let out = run_scenario(&sc, &cfg, 11).unwrap();
            let r = &out.report;
            assert!(r.total_requests > 50);
            assert_eq!(r.total_served + r.total_rejected + r.total_pending, r.total_requests);
            assert_eq!(r.served + r.rejected + r.pending, r.requests);
            assert_eq!(r.violations, 0);
            assert!(r.max_occupancy <= 4);
            assert!(r.total_served > 0);
            let logged = out.log.edge_fuel();
            assert!((logged - r.total_fuel).abs() <= 1e-6 * r.total_fuel);
            assert!(r.total_empty_distance <= r.total_distance);
            assert!((0.0..=1.0).contains(&r.served_ratio) && (0.0..=1.0).contains(&r.empty_ratio));
            assert!(r.wait_p25 <= r.wait_p75 && r.delay_p25 <= r.delay_p75);
            let served_events = out.log.of_kind(EventKind::Dropoff).count();
            assert_eq!(served_events, r.total_served);
            let again = run_scenario(&sc, &cfg, 11).unwrap();
            assert_eq!(&again.report, r);
            assert_eq!(again.log, out.log);
        }
    }
}
