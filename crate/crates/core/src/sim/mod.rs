//! Time-stepped fleet simulator.
//!
//! Vehicles move along precomputed routes at static link speeds. Every
//! assignment interval the engine batches waiting customers, assigns trips,
//! sends idle vehicles toward ignored customers and relocates the rest of the
//! idle fleet toward expected demand.

mod baseline;
mod config;
mod events;
mod metrics;
mod world;

use thiserror::Error;

pub use baseline::{baseline_report, run_baseline};
pub use config::{
    routing_policy, standard_demand, Routing, Scenario, ScenarioFile, SimConfig, Strategy, TripPhase, BASELINE,
    STANDARD_REQUESTS_PER_HOUR, STRATEGIES,
};
pub use events::{Event, EventKind, EventLog};
pub use metrics::{percentile, MetricsReport, METRICS_SCHEMA};
pub use world::{Odometer, Vehicle, VehicleStatus, World};

use crate::demand::DemandError;
use crate::network::NetworkError;
use crate::optim::OptimError;
use crate::pool::PoolError;
use crate::rebalance::RebalanceError;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("configuration {0} is outside 1..=9")]
    InvalidConfiguration(u8),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Rebalance(#[from] RebalanceError),
}

/// Metrics and event log of one run.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: MetricsReport,
    pub log: EventLog,
}

/// Runs fleet configuration `config.configuration` (1 to 8) on `scenario`.
pub fn run_scenario(scenario: &Scenario, config: &SimConfig, seed: u64) -> Result<SimOutput, SimError> {
    let requests = scenario.requests(config, seed)?;
    let mut world = World::new(scenario, config, requests, seed)?;
    world.run()?;
    let report = world.report(seed);
    Ok(SimOutput { report, log: world.into_log() })
}

/// Runs any configuration, including the personal-vehicle baseline.
pub fn run(scenario: &Scenario, config: &SimConfig, seed: u64) -> Result<MetricsReport, SimError> {
    if config.is_baseline() {
        run_baseline(scenario, config, seed)
    } else {
        Ok(run_scenario(scenario, config, seed)?.report)
    }
}
