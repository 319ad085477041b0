//! Runs the built-in scenario and prints headline metrics per run.
//!
//! cargo run --release -p ecomod --example standard_run -- [fleet] [configs, e.g. 1,8,9] [seeds]

use std::time::Instant;

use ecomod::sim::{run, Scenario, SimConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let fleet: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let configs: Vec<u8> = args.get(2).map_or(vec![1, 8, 9], |s| s.split(',').map(|c| c.parse().unwrap()).collect());
    let seeds: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);
    let scenario = Scenario::standard(7).expect("scenario");
    for configuration in configs {
        for seed in 0..seeds {
            let t = Instant::now();
            let cfg = SimConfig { configuration, fleet_size: fleet, ..Default::default() };
            let r = run(&scenario, &cfg, seed).expect("run");
            println!(
                "cfg {configuration} seed {seed} served {:.3} fpc {:.1} apv {:.3} opv {:.3} empty {:.3} wait {:.0} delay {:.0} viol {} occ {} ({:.1?})",
                r.served_ratio, r.fuel_per_customer, r.assigned_per_vehicle, r.onboard_per_vehicle, r.empty_ratio, r.wait_mean, r.delay_mean, r.violations, r.max_occupancy, t.elapsed()
            );
        }
    }
}
