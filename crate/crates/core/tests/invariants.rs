use std::sync::OnceLock;

use approx::assert_relative_eq;
use ecomod::network::{generate_grid, GridSpec, Metric, NodeId, RoutingTables};
use ecomod::scheduler::{
    solve_tsp_dp, Objective, PolicyCosts, SchedulerParams, StopKind, TravelCosts, VehicleId, VehicleStart, SCHEDULE_SLACK,
};
use ecomod::sim::{run_scenario, standard_demand, EventKind, Scenario, SimConfig};
use ecomod::{RequestId, TravelRequest};
use proptest::prelude::*;

fn tables() -> &'static (ecomod::RoadNetwork, RoutingTables) {
    static T: OnceLock<(ecomod::RoadNetwork, RoutingTables)> = OnceLock::new();
    T.get_or_init(|| {
        let net = generate_grid(&GridSpec { cols: 6, rows: 6, ..Default::default() }, 11).unwrap();
        let tables = RoutingTables::build(&net).unwrap();
        (net, tables)
    })
}

fn request() -> impl Strategy<Value = (u32, u32, f64, f64, f64)> {
    (0u32..36, 1u32..36, 0.0..60.0, 100.0..400.0, 60.0..400.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Any schedule the DP returns visits stops in a valid order, respects
    /// capacity and limits, and reports times that match the legs it drives.
    #[test]
    fn schedules_are_consistent(
        start in 0u32..36,
        raw in prop::collection::vec(request(), 1..=4),
        capacity in 1usize..=4,
        fuel_objective in any::<bool>(),
        eco_empty in any::<bool>(),
    ) {
        let (_, tables) = tables();
        let reqs: Vec<TravelRequest> = raw
            .iter()
            .enumerate()
            .map(|(i, &(o, step, back, wait, delay))| TravelRequest {
                id: RequestId(i as u32),
                origin: NodeId(o),
                destination: NodeId((o + step) % 36),
                request_time: 100.0 - back,
                max_wait: wait,
                max_delay: delay,
            })
            .collect();
        let costs = PolicyCosts { tables, empty: if eco_empty { Metric::Fuel } else { Metric::Time }, loaded: Metric::Time };
        let objective = if fuel_objective { Objective::Fuel } else { Objective::Time };
        let params = SchedulerParams { objective, w_d: 1.0, capacity };
        let v = VehicleStart::idle(VehicleId(0), NodeId(start), 100.0);
        let Ok(plan) = solve_tsp_dp(&v, &reqs, &costs, &params) else { return Ok(()) };

        prop_assert_eq!(plan.stops.len(), 2 * reqs.len());
        let (mut node, mut t, mut onboard, mut fuel) = (v.node, v.time, 0usize, 0.0);
        for s in &plan.stops {
            let leg = costs.leg(node, s.node, onboard);
            t += leg.time;
            fuel += leg.fuel;
            node = s.node;
            assert_relative_eq!(s.time, t, max_relative = 1e-12);
            let r = &reqs[s.request.0 as usize];
            match s.kind {
                StopKind::Pickup => {
                    prop_assert_eq!(s.node, r.origin);
                    onboard += 1;
                    prop_assert!(onboard <= capacity);
                }
                StopKind::Dropoff => {
                    prop_assert_eq!(s.node, r.destination);
                    prop_assert!(onboard > 0);
                    onboard -= 1;
                }
            }
        }
        assert_relative_eq!(plan.fuel, fuel, max_relative = 1e-12);
        for c in &plan.customers {
            let r = &reqs[c.request.0 as usize];
            prop_assert!(c.pickup_time < c.dropoff_time);
            prop_assert!(c.wait <= r.max_wait + SCHEDULE_SLACK);
            prop_assert!(c.delay <= r.max_delay + SCHEDULE_SLACK);
        }
    }

    /// Eco routes never burn more fuel and fastest routes are never slower.
    #[test]
    fn route_tables_are_ordered(seed in 0u64..1000) {
        let net = generate_grid(&GridSpec { cols: 4, rows: 4, ..Default::default() }, seed).unwrap();
        let t = RoutingTables::build(&net).unwrap();
        for a in net.node_ids() {
            for b in net.node_ids() {
                prop_assert!(t.eco.fuel(a, b) <= t.fastest.fuel(a, b) * (1.0 + 1e-12));
                prop_assert!(t.fastest.time(a, b) <= t.eco.time(a, b) * (1.0 + 1e-12));
                prop_assert!(t.shortest.distance(a, b) <= t.fastest.distance(a, b) * (1.0 + 1e-12));
            }
        }
    }
}

fn small_scenario() -> &'static Scenario {
    static S: OnceLock<Scenario> = OnceLock::new();
    S.get_or_init(|| {
        let net = generate_grid(&GridSpec { cols: 8, rows: 8, ..Default::default() }, 3).unwrap();
        Scenario::new(net, 9, standard_demand(300.0)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Every generated customer ends up served, rejected or pending, and the
    /// fuel in the event log adds up to the fleet total.
    #[test]
    fn runs_conserve_customers_and_fuel(configuration in 1u8..=8, fleet in 3usize..12, seed in 0u64..1000) {
        let scenario = small_scenario();
        let config = SimConfig { configuration, fleet_size: fleet, horizon: 1200.0, warmup: 300.0, ..Default::default() };
        let out = run_scenario(scenario, &config, seed).unwrap();
        let m = &out.report;
        let generated = scenario.requests(&config, seed).unwrap().len();
        prop_assert_eq!(m.total_requests, generated);
        prop_assert_eq!(m.total_served + m.total_rejected + m.total_pending, m.total_requests);
        prop_assert_eq!(out.log.of_kind(EventKind::Dropoff).count(), m.total_served);
        prop_assert_eq!(m.violations, 0);
        prop_assert!(m.max_occupancy <= config.capacity);
        assert_relative_eq!(out.log.edge_fuel(), m.total_fuel, max_relative = 1e-9);
        prop_assert!(m.total_empty_distance <= m.total_distance);
    }
}
