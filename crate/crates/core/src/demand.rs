//! Travel requests and their synthetic Poisson generation.

use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NodeId, PartitionId, PartitionSet};

pub const DEFAULT_MAX_WAIT: f64 = 300.0;
pub const DEFAULT_MAX_DELAY: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u32);

impl std::fmt::Display for RequestId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// A customer asking for a ride from `origin` to `destination`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelRequest {
    pub id: RequestId,
    #[serde(rename = "origin")]
    pub origin: NodeId,
    #[serde(rename = "dest")]
    pub destination: NodeId,
    #[serde(rename = "t_request")]
    pub request_time: f64,
    pub max_wait: f64,
    pub max_delay: f64,
}

impl TravelRequest {
    pub fn validate(&self) -> Result<(), DemandError> {
        if self.origin == self.destination {
            return Err(DemandError::InvalidRequest(self.id, "origin equals destination"));
        }
        if !(self.max_wait > 0.0) {
            return Err(DemandError::InvalidRequest(self.id, "max wait must be > 0"));
        }
        if !(self.max_delay >= 0.0) {
            return Err(DemandError::InvalidRequest(self.id, "max delay must be >= 0"));
        }
        Ok(())
    }

    /// Latest time the customer can still be picked up.
    pub fn pickup_deadline(&self) -> f64 {
        self.request_time + self.max_wait
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DemandError {
    #[error("partition {0:?} has no nodes")]
    EmptyPartition(PartitionId),
    #[error("demand model covers {model} partitions but the network has {network}")]
    PartitionMismatch { model: usize, network: usize },
    #[error("invalid demand model: {0}")]
    InvalidModel(String),
    #[error("invalid request {0}: {1}")]
    InvalidRequest(RequestId, &'static str),
    #[error("could not sample a destination different from origin {0:?}")]
    NoDestination(NodeId),
    #[error("request file: {0}")]
    Io(String),
}

/// Where trips go once their origin partition is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DestinationModel {
    /// One categorical over partitions shared by every origin.
    Global(Vec<f64>),
    /// Row `k` is the destination distribution for origin partition `k`.
    OdMatrix(Vec<Vec<f64>>),
}

/// Per-partition Poisson departure rates and destination choice.
///
/// The origin density is the normalized rate vector: partition `k` originates
/// a fraction `rates[k] / sum(rates)` of all trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    /// Departure rate per partition (req/s).
    pub rates: Vec<f64>,
    pub destinations: DestinationModel,
    #[serde(default = "default_wait")]
    pub max_wait: f64,
    #[serde(default = "default_delay")]
    pub max_delay: f64,
}

fn default_wait() -> f64 {
    DEFAULT_MAX_WAIT
}

fn default_delay() -> f64 {
    DEFAULT_MAX_DELAY
}

fn check_categorical(p: &[f64], what: &str) -> Result<(), DemandError> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(DemandError::InvalidModel(format!("{what} has negative or non-finite entries")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(DemandError::InvalidModel(format!("{what} sums to {s}, expected 1")));
    }
    Ok(())
}

impl DemandModel {
    /// Uniform destinations over `k` partitions.
    pub fn with_uniform_destinations(rates: Vec<f64>) -> Self {
        let k = rates.len();
        Self {
            rates,
            destinations: DestinationModel::Global(vec![1.0 / k as f64; k]),
            max_wait: DEFAULT_MAX_WAIT,
            max_delay: DEFAULT_MAX_DELAY,
        }
    }

    pub fn partitions(&self) -> usize {
        self.rates.len()
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    /// Origin density `o_k`; uniform when every rate is zero.
    pub fn origin_density(&self) -> Vec<f64> {
        let total = self.total_rate();
        let k = self.rates.len();
        if total > 0.0 {
            self.rates.iter().map(|r| r / total).collect()
        } else {
            vec![1.0 / k as f64; k]
        }
    }

    pub fn destination_density(&self, origin: PartitionId) -> &[f64] {
        match &self.destinations {
            DestinationModel::Global(p) => p,
            DestinationModel::OdMatrix(rows) => &rows[origin.index()],
        }
    }

    pub fn validate(&self) -> Result<(), DemandError> {
        let k = self.rates.len();
        if k == 0 {
            return Err(DemandError::InvalidModel("no partitions".into()));
        }
        if self.rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(DemandError::InvalidModel("rates must be finite and >= 0".into()));
        }
        match &self.destinations {
            DestinationModel::Global(p) => {
                if p.len() != k {
                    return Err(DemandError::InvalidModel(format!("destination density has {} entries, expected {k}", p.len())));
                }
                check_categorical(p, "destination density")?;
            }
            DestinationModel::OdMatrix(rows) => {
                if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                    return Err(DemandError::InvalidModel(format!("OD matrix must be {k}x{k}")));
                }
                for row in rows {
                    check_categorical(row, "OD matrix row")?;
                }
            }
        }
        if !(self.max_wait > 0.0) || !(self.max_delay >= 0.0) {
            return Err(DemandError::InvalidModel("max wait must be > 0 and max delay >= 0".into()));
        }
        Ok(())
    }
}

/// Samples requests on `[0, horizon)` from the superposed Poisson process with
/// rate `demand_ratio * sum(rates)`.
///
/// Origins pick a partition by origin density and then a node uniformly within
/// it; destinations do the same with the destination density, redrawing when
/// the destination node equals the origin. Ids are assigned in time order
/// starting at 0. Deterministic given `seed`.
pub fn generate_requests(
    model: &DemandModel,
    partitions: &PartitionSet,
    horizon: f64,
    demand_ratio: f64,
    seed: u64,
) -> Result<Vec<TravelRequest>, DemandError> {
    model.validate()?;
    if model.partitions() != partitions.len() {
        return Err(DemandError::PartitionMismatch { model: model.partitions(), network: partitions.len() });
    }
    if !(horizon > 0.0) {
        return Err(DemandError::InvalidModel(format!("horizon must be > 0, got {horizon}")));
    }
    if !(demand_ratio > 0.0 && demand_ratio <= 1.0) {
        return Err(DemandError::InvalidModel(format!("demand ratio must be in (0, 1], got {demand_ratio}")));
    }
    let rate = demand_ratio * model.total_rate();
    if rate <= 0.0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(rate).map_err(|e| DemandError::InvalidModel(e.to_string()))?;
    let origin_index = WeightedIndex::new(&model.rates).map_err(|e| DemandError::InvalidModel(e.to_string()))?;
    let dest_index: Vec<WeightedIndex<f64>> = (0..model.partitions())
        .map(|k| WeightedIndex::new(model.destination_density(PartitionId(k as u32))))
        .collect::<Result<_, _>>()
        .map_err(|e| DemandError::InvalidModel(e.to_string()))?;

    let pick_node = |rng: &mut ChaCha8Rng, p: PartitionId| -> Result<NodeId, DemandError> {
        let members = partitions.members(p);
        if members.is_empty() {
            return Err(DemandError::EmptyPartition(p));
        }
        Ok(members[rng.random_range(0..members.len())])
    };

    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t >= horizon {
            break;
        }
        let op = PartitionId(origin_index.sample(&mut rng) as u32);
        let origin = pick_node(&mut rng, op)?;
        let mut destination = None;
        for _ in 0..1000 {
            let dp = PartitionId(dest_index[op.index()].sample(&mut rng) as u32);
            let d = pick_node(&mut rng, dp)?;
            if d != origin {
                destination = Some(d);
                break;
            }
        }
        let destination = destination.ok_or(DemandError::NoDestination(origin))?;
        out.push(TravelRequest {
            id: RequestId(out.len() as u32),
            origin,
            destination,
            request_time: t,
            max_wait: model.max_wait,
            max_delay: model.max_delay,
        });
    }
    Ok(out)
}

pub fn write_requests_csv<W: Write>(requests: &[TravelRequest], writer: W) -> Result<(), DemandError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in requests {
        w.serialize(r).map_err(|e| DemandError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| DemandError::Io(e.to_string()))
}

/// Reads `id,origin,dest,t_request,max_wait,max_delay` rows, sorted by time.
pub fn read_requests_csv<R: Read>(reader: R) -> Result<Vec<TravelRequest>, DemandError> {
    let mut out: Vec<TravelRequest> = csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| DemandError::Io(e.to_string()))?;
    for r in &out {
        r.validate()?;
    }
    out.sort_by(|a, b| a.request_time.total_cmp(&b.request_time).then(a.id.cmp(&b.id)));
    Ok(out)
}
