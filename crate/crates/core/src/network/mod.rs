//! Road graph, dual-metric routing and spatial partitioning.

mod grid;
pub mod io;
mod partition;
mod routing;

pub use grid::{generate_grid, GridSpec};
pub use partition::{partition_network, PartitionId, PartitionSet};
pub use routing::{all_pairs_costs, shortest_path, CostMatrix, Metric, Route, RoutingTables};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuel::FuelModel;

/// Dense node index. Node ids in network files must be `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense edge index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("node {0} does not exist")]
    UnknownNode(u32),
    #[error("node ids must be dense 0..n, found {found} at position {position}")]
    NonDenseNodeId { position: usize, found: u32 },
    #[error("edge {edge}: {reason}")]
    InvalidEdge { edge: u32, reason: &'static str },
    #[error("no route from node {from} to node {to}")]
    UnreachableDestination { from: NodeId, to: NodeId },
    #[error("partition count {k} is outside 1..={nodes}")]
    InvalidK { k: usize, nodes: usize },
    #[error("network has no nodes")]
    Empty,
    #[error("io error: {0}")]
    Io(String),
    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    /// Meters.
    pub length: f64,
    /// Static operating speed, m/s.
    pub speed: f64,
    pub lanes: u32,
}

impl Edge {
    #[inline]
    pub fn travel_time(&self) -> f64 {
        self.length / self.speed
    }
}

/// Directed road graph with planar coordinates in meters.
///
/// Every edge carries its length, static speed and lane count. Fuel costs are
/// derived from the attached [`FuelModel`], so the network is the single source
/// of the time, fuel and distance edge weights.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    fuel_model: FuelModel,
}

impl RoadNetwork {
    /// Builds a network, checking edge attributes and node references.
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, NetworkError> {
        if nodes.is_empty() {
            return Err(NetworkError::Empty);
        }
        let n = nodes.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            let id = i as u32;
            if e.from.index() >= n {
                return Err(NetworkError::UnknownNode(e.from.0));
            }
            if e.to.index() >= n {
                return Err(NetworkError::UnknownNode(e.to.0));
            }
            if !(e.length > 0.0 && e.length.is_finite()) {
                return Err(NetworkError::InvalidEdge { edge: id, reason: "length must be > 0" });
            }
            if !(e.speed > 0.0 && e.speed.is_finite()) {
                return Err(NetworkError::InvalidEdge { edge: id, reason: "speed must be > 0" });
            }
            if e.lanes == 0 {
                return Err(NetworkError::InvalidEdge { edge: id, reason: "lane count must be >= 1" });
            }
            if e.from == e.to {
                return Err(NetworkError::InvalidEdge { edge: id, reason: "self loops are not allowed" });
            }
            out_edges[e.from.index()].push(EdgeId(id));
            in_edges[e.to.index()].push(EdgeId(id));
        }
        Ok(Self { nodes, edges, out_edges, in_edges, fuel_model: FuelModel::default() })
    }

    pub fn with_fuel_model(mut self, model: FuelModel) -> Self {
        self.fuel_model = model;
        self
    }

    pub fn fuel_model(&self) -> &FuelModel {
        &self.fuel_model
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.index()]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.out_edges[node.index()]
    }

    pub fn in_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.in_edges[node.index()]
    }

    pub fn check_node(&self, node: NodeId) -> Result<(), NetworkError> {
        if node.index() < self.nodes.len() {
            Ok(())
        } else {
            Err(NetworkError::UnknownNode(node.0))
        }
    }

    /// Edge weight under `metric`: seconds, grams or meters.
    #[inline]
    pub fn edge_cost(&self, edge: EdgeId, metric: Metric) -> f64 {
        let e = &self.edges[edge.index()];
        match metric {
            Metric::Time => e.travel_time(),
            Metric::Fuel => self.edge_fuel(edge),
            Metric::Distance => e.length,
        }
    }

    #[inline]
    pub fn edge_fuel(&self, edge: EdgeId) -> f64 {
        let e = &self.edges[edge.index()];
        self.fuel_model.fuel_rate(e.speed) * e.length
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        let (p, q) = (self.node(a), self.node(b));
        (p.x - q.x).hypot(p.y - q.y)
    }

    /// True when every node can reach every other node.
    pub fn is_strongly_connected(&self) -> bool {
        let reach = |forward: bool| {
            let mut seen = vec![false; self.nodes.len()];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(u) = stack.pop() {
                let list = if forward { &self.out_edges[u] } else { &self.in_edges[u] };
                for &e in list {
                    let edge = &self.edges[e.index()];
                    let v = if forward { edge.to } else { edge.from }.index();
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Returns a copy with edge speeds replaced by `speed(edge) `, keeping
    /// everything else. Used for empirical-speed routing.
    pub fn with_speeds(&self, mut speed: impl FnMut(EdgeId, &Edge) -> f64) -> Result<Self, NetworkError> {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| Edge { speed: speed(EdgeId(i as u32), e), ..*e })
            .collect();
        Ok(RoadNetwork::new(self.nodes.clone(), edges)?.with_fuel_model(self.fuel_model))
    }
}
