use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::demand::{generate_requests, read_requests_csv, DemandModel, DestinationModel, TravelRequest};
use crate::network::{generate_grid, io, partition_network, GridSpec, Metric, PartitionSet, RoadNetwork, RoutingTables};
use crate::rebalance::RebalanceParams;
use crate::scheduler::{Objective, DEFAULT_CAPACITY};

/// Route choice of a trip leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Routing {
    Fastest,
    Eco,
    /// Fastest route while carrying passengers, eco route when empty.
    Hybrid,
}

impl Routing {
    pub fn metric(self, occupancy: usize) -> Metric {
        match self {
            Routing::Fastest => Metric::Time,
            Routing::Eco => Metric::Fuel,
            Routing::Hybrid if occupancy > 0 => Metric::Time,
            Routing::Hybrid => Metric::Fuel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripPhase {
    /// Legs of assigned trips.
    Assignment,
    PassiveRebalance,
    ActiveRebalance,
}

/// One of the eight fleet strategies: assignment cost plus the routing used
/// for assigned trips and for passive rebalancing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub id: u8,
    pub objective: Objective,
    pub assignment: Routing,
    pub passive: Routing,
}

pub const STRATEGIES: [Strategy; 8] = [
    Strategy { id: 1, objective: Objective::Time, assignment: Routing::Fastest, passive: Routing::Fastest },
    Strategy { id: 2, objective: Objective::Time, assignment: Routing::Hybrid, passive: Routing::Hybrid },
    Strategy { id: 3, objective: Objective::Time, assignment: Routing::Eco, passive: Routing::Fastest },
    Strategy { id: 4, objective: Objective::Time, assignment: Routing::Eco, passive: Routing::Eco },
    Strategy { id: 5, objective: Objective::Fuel, assignment: Routing::Fastest, passive: Routing::Fastest },
    Strategy { id: 6, objective: Objective::Fuel, assignment: Routing::Hybrid, passive: Routing::Hybrid },
    Strategy { id: 7, objective: Objective::Fuel, assignment: Routing::Eco, passive: Routing::Fastest },
    Strategy { id: 8, objective: Objective::Fuel, assignment: Routing::Eco, passive: Routing::Eco },
];

/// Configuration id of the personal-vehicle baseline.
pub const BASELINE: u8 = 9;

impl Strategy {
    /// Strategy of configuration `id` (1 to 8).
    pub fn get(id: u8) -> Result<Strategy, SimError> {
        STRATEGIES.iter().copied().find(|s| s.id == id).ok_or(SimError::InvalidConfiguration(id))
    }

    /// Routing metric of a leg driven with `occupancy` passengers in `phase`.
    /// Active rebalancing always uses eco routes.
    pub fn routing_policy(&self, occupancy: usize, phase: TripPhase) -> Metric {
        match phase {
            TripPhase::Assignment => self.assignment.metric(occupancy),
            TripPhase::PassiveRebalance => self.passive.metric(occupancy),
            TripPhase::ActiveRebalance => Metric::Fuel,
        }
    }
}

/// Routing metric for configuration `id`; see [`Strategy::routing_policy`].
pub fn routing_policy(id: u8, occupancy: usize, phase: TripPhase) -> Result<Metric, SimError> {
    Ok(Strategy::get(id)?.routing_policy(occupancy, phase))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// 1 to 8 for the fleet strategies, 9 for the personal-vehicle baseline.
    pub configuration: u8,
    pub fleet_size: usize,
    /// Assignment interval, s.
    pub interval: f64,
    /// Motion step, s.
    pub dt: f64,
    /// Demand horizon, s. Requests arrive in `[0, horizon)`.
    pub horizon: f64,
    /// Start of the measurement window, s.
    pub warmup: f64,
    pub demand_ratio: f64,
    pub w_d: f64,
    pub capacity: usize,
    pub max_wait: f64,
    pub max_delay: f64,
    /// Cap on vehicle edges per request in the shareability graph.
    pub max_vehicles_per_request: Option<usize>,
    pub passive_rebalance: bool,
    pub active_rebalance: bool,
    pub rebalance: RebalanceParams,
    /// Baseline share of trips on shortest-distance routes (the rest fastest).
    pub baseline_mix: f64,
    /// Extra simulated time after the horizon to finish open trips, s.
    pub drain_limit: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            configuration: 1,
            fleet_size: 60,
            interval: 30.0,
            dt: 1.0,
            horizon: 7200.0,
            warmup: 2400.0,
            demand_ratio: 1.0,
            w_d: 1.0,
            capacity: DEFAULT_CAPACITY,
            max_wait: 300.0,
            max_delay: 300.0,
            max_vehicles_per_request: Some(12),
            passive_rebalance: true,
            active_rebalance: true,
            rebalance: RebalanceParams::default(),
            baseline_mix: 0.5,
            drain_limit: 3600.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(1..=9).contains(&self.configuration) {
            return Err(SimError::InvalidConfiguration(self.configuration));
        }
        let bad = |m: &str| Err(SimError::InvalidConfig(m.into()));
        if !(self.dt > 0.0 && self.interval >= self.dt && self.horizon > 0.0) {
            return bad("need dt > 0, interval >= dt and horizon > 0");
        }
        if (self.interval / self.dt - (self.interval / self.dt).round()).abs() > 1e-9 {
            return bad("interval must be a multiple of dt");
        }
        if !(self.warmup >= 0.0 && self.warmup < self.horizon) {
            return bad("warmup must lie in [0, horizon)");
        }
        if !(self.demand_ratio > 0.0 && self.demand_ratio <= 1.0) {
            return bad("demand ratio must be in (0, 1]");
        }
        if self.capacity == 0 || self.max_wait <= 0.0 || self.max_delay < 0.0 || self.w_d < 0.0 {
            return bad("capacity, wait and delay limits must be positive");
        }
        if !(0.0..=1.0).contains(&self.baseline_mix) {
            return bad("baseline mix must be in [0, 1]");
        }
        Ok(())
    }

    pub fn is_baseline(&self) -> bool {
        self.configuration == BASELINE
    }

    /// Rebalancing parameters with the interval kept in sync.
    pub fn rebalance_params(&self) -> RebalanceParams {
        RebalanceParams { interval: self.interval, ..self.rebalance }
    }
}

/// Network, partitions, routing tables and demand model of a city.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: RoadNetwork,
    pub partitions: PartitionSet,
    pub tables: RoutingTables,
    pub demand: DemandModel,
    /// Fixed request list; when absent requests are drawn from `demand` per seed.
    pub requests: Option<Vec<TravelRequest>>,
}

/// Requests per hour of the standard scenario.
pub const STANDARD_REQUESTS_PER_HOUR: f64 = 600.0;

impl Scenario {
    pub fn new(network: RoadNetwork, partitions: usize, demand: DemandModel) -> Result<Self, SimError> {
        let partitions = partition_network(&network, partitions)?;
        if demand.partitions() != partitions.len() {
            return Err(SimError::InvalidConfig(format!(
                "demand model has {} partitions, network {}",
                demand.partitions(),
                partitions.len()
            )));
        }
        demand.validate()?;
        let tables = RoutingTables::build(&network)?;
        Ok(Self { network, partitions, tables, demand, requests: None })
    }

    /// 20 x 20 grid with 200 m blocks, 9 partitions and about 600 requests per
    /// hour, concentrated downtown.
    pub fn standard(seed: u64) -> Result<Self, SimError> {
        let network = generate_grid(&GridSpec::default(), seed)?;
        Self::new(network, 9, standard_demand(STANDARD_REQUESTS_PER_HOUR))
    }

    /// Requests of one run: the fixed list if any, otherwise a fresh draw.
    pub fn requests(&self, config: &SimConfig, seed: u64) -> Result<Vec<TravelRequest>, SimError> {
        let mut reqs = match &self.requests {
            Some(r) => r.iter().filter(|r| r.request_time < config.horizon).cloned().collect(),
            None => generate_requests(&self.demand, &self.partitions, config.horizon, config.demand_ratio, seed)?,
        };
        for r in &mut reqs {
            r.max_wait = config.max_wait;
            r.max_delay = config.max_delay;
        }
        Ok(reqs)
    }
}

/// Demand of the standard scenario: 3 x 3 partitions, the center one
/// originating and attracting three times as many trips as each other cell.
pub fn standard_demand(per_hour: f64) -> DemandModel {
    let weights: Vec<f64> = (0..9).map(|k| if k == 4 { 3.0 } else { 1.0 }).collect();
    let total: f64 = weights.iter().sum();
    let rates = weights.iter().map(|w| per_hour / 3600.0 * w / total).collect();
    let mut model = DemandModel::with_uniform_destinations(rates);
    model.destinations = DestinationModel::Global(weights.iter().map(|w| w / total).collect());
    model
}

/// Scenario description read from TOML; paths are relative to the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    /// `.json` network document or `nodes.csv` with a sibling `edges.csv`.
    pub network: PathBuf,
    pub partitions: usize,
    /// Fixed request list (CSV); otherwise requests are drawn from `demand`.
    #[serde(default)]
    pub requests: Option<PathBuf>,
    pub demand: DemandModel,
    #[serde(default)]
    pub sim: SimConfig,
}

impl ScenarioFile {
    pub fn read(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let mut file: ScenarioFile = toml::from_str(&text).map_err(|e| SimError::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        file.network = base.join(&file.network);
        file.requests = file.requests.map(|r| base.join(r));
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn load(&self) -> Result<Scenario, SimError> {
        let network = io::load(&self.network)?;
        let mut scenario = Scenario::new(network, self.partitions, self.demand.clone())?;
        if let Some(path) = &self.requests {
            let f = std::fs::File::open(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
            scenario.requests = Some(read_requests_csv(std::io::BufReader::new(f))?);
        }
        Ok(scenario)
    }
}
