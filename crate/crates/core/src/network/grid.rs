use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Edge, NetworkError, Node, NodeId, RoadNetwork};
use crate::flow::SpeedDensityModel;
use crate::fuel::FuelModel;

/// Parameters of the synthetic city: a Manhattan grid with a fast outer ring,
/// periodic arterials, local streets and a congested downtown.
///
/// Link speeds are the free-flow speed scaled by the speed-density model at a
/// synthetic background density, so downtown links are slow and fuel-hungry
/// while the ring is fast but past the fuel-optimal speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub cols: usize,
    pub rows: usize,
    /// Meters between adjacent intersections.
    pub spacing: f64,
    /// Every `arterial_every`-th row and column is an arterial (0 disables).
    pub arterial_every: usize,
    pub ring_speed: f64,
    pub arterial_speed: f64,
    pub local_speed: f64,
    /// Background density (veh/m/lane) away from downtown.
    pub base_density: f64,
    /// Extra density at the city center.
    pub downtown_density: f64,
    /// Downtown radius as a fraction of the grid half-width.
    pub downtown_radius: f64,
    /// Relative multiplicative noise on densities.
    pub density_noise: f64,
    pub speed_model: SpeedDensityModel,
    pub fuel_model: FuelModel,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cols: 20,
            rows: 20,
            spacing: 200.0,
            arterial_every: 5,
            ring_speed: 28.0,
            arterial_speed: 17.0,
            local_speed: 11.0,
            base_density: 0.008,
            downtown_density: 0.04,
            downtown_radius: 0.45,
            density_noise: 0.2,
            speed_model: SpeedDensityModel::default(),
            fuel_model: FuelModel::default(),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum RoadClass {
    Ring,
    Arterial,
    Local,
}

/// Generates the synthetic grid city. Deterministic given `seed`.
pub fn generate_grid(spec: &GridSpec, seed: u64) -> Result<RoadNetwork, NetworkError> {
    if spec.cols == 0 || spec.rows == 0 {
        return Err(NetworkError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cols, rows) = (spec.cols, spec.rows);
    let id = |c: usize, r: usize| NodeId((r * cols + c) as u32);
    let mut nodes = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(Node { x: c as f64 * spec.spacing, y: r as f64 * spec.spacing });
        }
    }

    let center = ((cols - 1) as f64 * spec.spacing / 2.0, (rows - 1) as f64 * spec.spacing / 2.0);
    let half = center.0.max(center.1).max(spec.spacing);
    let sigma = (spec.downtown_radius * half).max(1e-9);
    let arterial = |i: usize| spec.arterial_every > 0 && i % spec.arterial_every == spec.arterial_every / 2;

    let mut edges = Vec::new();
    let mut link = |rng: &mut ChaCha8Rng, a: NodeId, b: NodeId, class: RoadClass| {
        let (pa, pb) = (&nodes[a.index()], &nodes[b.index()]);
        let mid = ((pa.x + pb.x) / 2.0 - center.0, (pa.y + pb.y) / 2.0 - center.1);
        let r2 = (mid.0 * mid.0 + mid.1 * mid.1) / (sigma * sigma);
        let (free_flow, lanes, congestion) = match class {
            RoadClass::Ring => (spec.ring_speed, 3, 0.0),
            RoadClass::Arterial => (spec.arterial_speed, 2, 0.5),
            RoadClass::Local => (spec.local_speed, 1, 1.0),
        };
        let noise = 1.0 + spec.density_noise * (2.0 * rng.random::<f64>() - 1.0);
        let density = (spec.base_density + congestion * spec.downtown_density * (-0.5 * r2).exp()) * noise;
        let speed = free_flow * spec.speed_model.mean_speed(density.max(0.0));
        for (from, to) in [(a, b), (b, a)] {
            edges.push(Edge { from, to, length: spec.spacing, speed, lanes });
        }
    };

    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                let class = if r == 0 || r == rows - 1 {
                    RoadClass::Ring
                } else if arterial(r) {
                    RoadClass::Arterial
                } else {
                    RoadClass::Local
                };
                link(&mut rng, id(c, r), id(c + 1, r), class);
            }
            if r + 1 < rows {
                let class = if c == 0 || c == cols - 1 {
                    RoadClass::Ring
                } else if arterial(c) {
                    RoadClass::Arterial
                } else {
                    RoadClass::Local
                };
                link(&mut rng, id(c, r), id(c, r + 1), class);
            }
        }
    }
    Ok(RoadNetwork::new(nodes, edges)?.with_fuel_model(spec.fuel_model))
}
