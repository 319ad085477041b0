use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Scenario, SimConfig, BASELINE};
use super::metrics::MetricsReport;
use super::SimError;
use crate::demand::TravelRequest;
use crate::network::{Metric, RoutingTables};

/// Personal-vehicle baseline over the scenario's requests for `seed`.
pub fn run_baseline(scenario: &Scenario, config: &SimConfig, seed: u64) -> Result<MetricsReport, SimError> {
    let requests = scenario.requests(config, seed)?;
    baseline_report(&scenario.tables, &requests, config, seed)
}

/// Every customer drives alone from origin to destination at request time,
/// on the shortest-distance route with probability `config.baseline_mix` and
/// the fastest route otherwise. Wait and delay are zero by construction.
pub fn baseline_report(tables: &RoutingTables, requests: &[TravelRequest], config: &SimConfig, seed: u64) -> Result<MetricsReport, SimError> {
    if !(0.0..=1.0).contains(&config.baseline_mix) {
        return Err(SimError::InvalidConfig("baseline mix must be in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xba5e_11e);
    let (mut fuel, mut total_fuel, mut total_distance, mut window) = (0.0, 0.0, 0.0, 0usize);
    for r in requests {
        let metric = if rng.random_bool(config.baseline_mix) { Metric::Distance } else { Metric::Time };
        let m = tables.get(metric);
        let (f, d) = (m.fuel(r.origin, r.destination), m.distance(r.origin, r.destination));
        total_fuel += f;
        total_distance += d;
        if r.request_time >= config.warmup && r.request_time < config.horizon {
            fuel += f;
            window += 1;
        }
    }
    let n = requests.len();
    Ok(MetricsReport {
        configuration: BASELINE,
        fleet_size: 0,
        seed,
        requests: window,
        served: window,
        rejected: 0,
        pending: 0,
        served_ratio: if window > 0 { 1.0 } else { 0.0 },
        wait_mean: 0.0,
        wait_p25: 0.0,
        wait_p75: 0.0,
        delay_mean: 0.0,
        delay_p25: 0.0,
        delay_p75: 0.0,
        fleet_fuel: fuel,
        fuel_per_customer: if window > 0 { fuel / window as f64 } else { 0.0 },
        empty_ratio: 0.0,
        assigned_per_vehicle: 1.0,
        onboard_per_vehicle: 1.0,
        baseline_fuel_delta: Some(0.0),
        violations: 0,
        max_occupancy: (n > 0) as usize,
        total_requests: n,
        total_served: n,
        total_rejected: 0,
        total_pending: 0,
        total_fuel,
        total_distance,
        total_empty_distance: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{generate_grid, GridSpec};
    use crate::sim::config::standard_demand;

    fn scenario() -> Scenario {
        let net = generate_grid(&GridSpec { cols: 6, rows: 6, ..Default::default() }, 9).unwrap();
        Scenario::new(net, 9, standard_demand(600.0)).unwrap()
    }

    #[test]
    fn pure_mixes_use_one_route_type() {
        let sc = scenario();
        let base = SimConfig { horizon: 1800.0, warmup: 0.0, ..Default::default() };
        let reqs = sc.requests(&base, 5).unwrap();
        for (mix, metric) in [(1.0, Metric::Distance), (0.0, Metric::Time)] {
            let r = baseline_report(&sc.tables, &reqs, &SimConfig { baseline_mix: mix, ..base.clone() }, 5).unwrap();
            let m = sc.tables.get(metric);
            let expected: f64 = reqs.iter().map(|q| m.fuel(q.origin, q.destination)).sum();
            assert!((r.fleet_fuel - expected).abs() < 1e-9 * expected);
            let dist: f64 = reqs.iter().map(|q| m.distance(q.origin, q.destination)).sum();
            assert!((r.total_distance - dist).abs() < 1e-9 * dist);
        }
    }

    #[test]
    fn baseline_has_no_wait_or_delay() {
        let sc = scenario();
        let cfg = SimConfig { horizon: 1800.0, warmup: 600.0, configuration: BASELINE, ..Default::default() };
        let r = run_baseline(&sc, &cfg, 2).unwrap();
        assert!(r.requests > 0);
        assert_eq!(r.served, r.requests);
        assert_eq!((r.wait_mean, r.wait_p75, r.delay_mean, r.delay_p75), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.served_ratio, 1.0);
        assert!(run_baseline(&sc, &SimConfig { baseline_mix: 1.5, ..cfg }, 2).is_err());
    }
}
