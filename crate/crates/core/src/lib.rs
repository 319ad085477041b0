//! Fuel-aware ride-sharing dispatch for a mobility-on-demand fleet.
//!
//! The pieces: a road network with fuel-annotated links and precomputed
//! fastest, eco and shortest routes; Poisson travel demand; shareability
//! graphs with exact pickup-and-delivery scheduling; trip-vehicle assignment
//! as a 0-1 program; idle-fleet rebalancing; OD-flow calibration from link
//! speeds; and a time-stepped simulator that runs them together.
//!
//! ```
//! use ecomod::sim::{run_scenario, Scenario, SimConfig};
//!
//! let scenario = Scenario::standard(7).unwrap();
//! let config = SimConfig { configuration: 8, fleet_size: 30, horizon: 900.0, warmup: 300.0, ..Default::default() };
//! let out = run_scenario(&scenario, &config, 1).unwrap();
//! assert_eq!(out.report.violations, 0);
//! ```

pub mod assignment;
pub mod calibration;
pub mod demand;
pub mod flow;
pub mod fuel;
pub mod network;
pub mod optim;
pub mod pool;
pub mod rebalance;
pub mod scheduler;
pub mod shareability;
pub mod sim;

pub use demand::{RequestId, TravelRequest};
pub use network::{EdgeId, Metric, NodeId, RoadNetwork};
pub use scheduler::{Objective, VehicleId};
pub use sim::{MetricsReport, Scenario, SimConfig};

// Snippets in the guide under book/ run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/demand.md")]
    mod demand {}
    #[doc = include_str!("../../../book/src/scheduling.md")]
    mod scheduling {}
    #[doc = include_str!("../../../book/src/assignment.md")]
    mod assignment {}
    #[doc = include_str!("../../../book/src/rebalancing.md")]
    mod rebalancing {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
}
