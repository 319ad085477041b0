use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{NetworkError, NodeId, RoadNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartitionId(pub u32);

impl PartitionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Assignment of every node to one spatial partition, plus partition centers
/// and the (symmetric) partition adjacency induced by road edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSet {
    of_node: Vec<PartitionId>,
    members: Vec<Vec<NodeId>>,
    centers: Vec<NodeId>,
    adjacency: Vec<Vec<PartitionId>>,
}

impl PartitionSet {
    /// Builds a partition set from a per-node labelling. Labels must cover
    /// `0..k` with no empty partition.
    pub fn from_labels(network: &RoadNetwork, labels: Vec<PartitionId>) -> Result<Self, NetworkError> {
        let n = network.node_count();
        assert_eq!(labels.len(), n, "one label per node");
        let k = labels.iter().map(|p| p.index() + 1).max().unwrap_or(0);
        let mut members = vec![Vec::new(); k];
        for (i, p) in labels.iter().enumerate() {
            members[p.index()].push(NodeId(i as u32));
        }
        if members.iter().any(Vec::is_empty) {
            return Err(NetworkError::InvalidK { k, nodes: n });
        }
        let centers = members.iter().map(|m| medoid(network, m)).collect();
        let mut adj = vec![BTreeSet::new(); k];
        for e in network.edges() {
            let (a, b) = (labels[e.from.index()], labels[e.to.index()]);
            if a != b {
                adj[a.index()].insert(b);
                adj[b.index()].insert(a);
            }
        }
        Ok(Self {
            of_node: labels,
            members,
            centers,
            adjacency: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = PartitionId> {
        (0..self.members.len() as u32).map(PartitionId)
    }

    #[inline]
    pub fn partition_of(&self, node: NodeId) -> PartitionId {
        self.of_node[node.index()]
    }

    pub fn members(&self, p: PartitionId) -> &[NodeId] {
        &self.members[p.index()]
    }

    pub fn center(&self, p: PartitionId) -> NodeId {
        self.centers[p.index()]
    }

    pub fn adjacent(&self, p: PartitionId) -> &[PartitionId] {
        &self.adjacency[p.index()]
    }
}

/// Node minimizing the mean euclidean distance to the other members.
fn medoid(network: &RoadNetwork, members: &[NodeId]) -> NodeId {
    let mut best = (f64::INFINITY, members[0]);
    for &c in members {
        let total: f64 = members.iter().map(|&m| network.distance(c, m)).sum();
        if total < best.0 {
            best = (total, c);
        }
    }
    best.1
}

/// Factor `k` into `cols * rows` as close to the bounding-box aspect as possible.
fn grid_shape(k: usize, width: f64, height: f64) -> (usize, usize) {
    let aspect = if height > 0.0 { width / height } else { f64::INFINITY };
    let mut best = (k, 1);
    let mut best_score = f64::INFINITY;
    for cols in 1..=k {
        if k % cols != 0 {
            continue;
        }
        let rows = k / cols;
        let score = ((cols as f64 / rows as f64).ln() - aspect.max(1e-9).ln()).abs();
        let score = if score.is_finite() { score } else { cols as f64 };
        if score < best_score - 1e-12 {
            best_score = score;
            best = (cols, rows);
        }
    }
    best
}

/// Splits the network into `k` spatial partitions.
///
/// The default is a uniform grid of `cols x rows = k` cells over the node
/// bounding box. When some cell would be empty (irregular layouts) the cells
/// fall back to equal-count strips: nodes are split into `cols` groups by x and
/// each group into `rows` groups by y, which keeps exactly `k` non-empty
/// partitions for any `k <= n`.
pub fn partition_network(network: &RoadNetwork, k: usize) -> Result<PartitionSet, NetworkError> {
    let n = network.node_count();
    if k == 0 || k > n {
        return Err(NetworkError::InvalidK { k, nodes: n });
    }
    let nodes = network.nodes();
    let (min_x, max_x) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
    let (min_y, max_y) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let (cols, rows) = grid_shape(k, max_x - min_x, max_y - min_y);

    let cell = |v: f64, lo: f64, hi: f64, count: usize| -> usize {
        if hi <= lo {
            return 0;
        }
        (((v - lo) / (hi - lo) * count as f64).floor() as usize).min(count - 1)
    };
    let uniform: Vec<PartitionId> = nodes
        .iter()
        .map(|p| {
            let c = cell(p.x, min_x, max_x, cols);
            let r = cell(p.y, min_y, max_y, rows);
            PartitionId((r * cols + c) as u32)
        })
        .collect();
    let mut used = vec![false; k];
    for p in &uniform {
        used[p.index()] = true;
    }
    if used.iter().all(|&u| u) {
        return PartitionSet::from_labels(network, uniform);
    }

    let mut by_x: Vec<usize> = (0..n).collect();
    by_x.sort_by(|&a, &b| nodes[a].x.total_cmp(&nodes[b].x).then(nodes[a].y.total_cmp(&nodes[b].y)).then(a.cmp(&b)));
    let mut labels = vec![PartitionId(0); n];
    for (c, column) in split_even(&by_x, cols).into_iter().enumerate() {
        let mut column = column.to_vec();
        column.sort_by(|&a, &b| nodes[a].y.total_cmp(&nodes[b].y).then(nodes[a].x.total_cmp(&nodes[b].x)).then(a.cmp(&b)));
        for (r, group) in split_even(&column, rows).into_iter().enumerate() {
            for &i in group {
                labels[i] = PartitionId((r * cols + c) as u32);
            }
        }
    }
    PartitionSet::from_labels(network, labels)
}

fn split_even<T>(items: &[T], parts: usize) -> Vec<&[T]> {
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let len = base + usize::from(i < extra);
        out.push(&items[start..start + len]);
        start += len;
    }
    out
}
