use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{EdgeId, NetworkError, NodeId, RoadNetwork};

/// Routing objective. `Distance` only serves the personal-vehicle baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Time,
    Fuel,
    Distance,
}

const NO_EDGE: u32 = u32::MAX;

/// A path with its totals under all three metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
    /// Seconds.
    pub time: f64,
    /// Grams.
    pub fuel: f64,
    /// Meters.
    pub distance: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    cost: f64,
    node: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path tree towards one destination.
struct TreeToDest {
    next_edge: Vec<u32>,
    time: Vec<f64>,
    fuel: Vec<f64>,
    distance: Vec<f64>,
    reachable: Vec<bool>,
}

fn dist_to(network: &RoadNetwork, dest: NodeId, metric: Metric) -> Vec<f64> {
    let n = network.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[dest.index()] = 0.0;
    heap.push(HeapItem { cost: 0.0, node: dest.0 });
    while let Some(HeapItem { cost, node }) = heap.pop() {
        if cost > dist[node as usize] {
            continue;
        }
        for &e in network.in_edges(NodeId(node)) {
            let edge = network.edge(e);
            let candidate = cost + network.edge_cost(e, metric);
            let u = edge.from.index();
            if candidate < dist[u] {
                dist[u] = candidate;
                heap.push(HeapItem { cost: candidate, node: edge.from.0 });
            }
        }
    }
    dist
}

/// Builds the tree whose paths are, among all optimal paths, the
/// lexicographically smallest node sequences.
fn tree_to(network: &RoadNetwork, dest: NodeId, metric: Metric) -> TreeToDest {
    let n = network.node_count();
    let dist = dist_to(network, dest, metric);
    let mut next_edge = vec![NO_EDGE; n];
    for u in 0..n {
        if u == dest.index() || !dist[u].is_finite() {
            continue;
        }
        let tol = 1e-9 * dist[u].max(1.0);
        // (next node, edge cost, edge id)
        let mut best: Option<(u32, f64, u32)> = None;
        for &e in network.out_edges(NodeId(u as u32)) {
            let edge = network.edge(e);
            let w = edge.to.index();
            let c = network.edge_cost(e, metric);
            if !(dist[w] < dist[u]) || c + dist[w] > dist[u] + tol {
                continue;
            }
            let better = match best {
                None => true,
                Some((bw, bc, be)) => (edge.to.0, c, e.0) < (bw, bc, be),
            };
            if better {
                best = Some((edge.to.0, c, e.0));
            }
        }
        next_edge[u] = best.map(|b| b.2).expect("optimal predecessor must exist");
    }

    let mut order: Vec<usize> = (0..n).filter(|&u| dist[u].is_finite()).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let mut time = vec![f64::INFINITY; n];
    let mut fuel = vec![f64::INFINITY; n];
    let mut distance = vec![f64::INFINITY; n];
    let mut reachable = vec![false; n];
    for u in order {
        reachable[u] = true;
        if u == dest.index() {
            time[u] = 0.0;
            fuel[u] = 0.0;
            distance[u] = 0.0;
            continue;
        }
        let e = EdgeId(next_edge[u]);
        let edge = network.edge(e);
        let w = edge.to.index();
        time[u] = edge.travel_time() + time[w];
        fuel[u] = network.edge_fuel(e) + fuel[w];
        distance[u] = edge.length + distance[w];
    }
    TreeToDest { next_edge, time, fuel, distance, reachable }
}

/// Optimal route from `origin` to `dest` under `metric`.
///
/// Among equal-cost routes the lexicographically smallest node sequence wins,
/// so the answer is deterministic and identical to the corresponding
/// [`CostMatrix`] entry.
pub fn shortest_path(network: &RoadNetwork, origin: NodeId, dest: NodeId, metric: Metric) -> Result<Route, NetworkError> {
    network.check_node(origin)?;
    network.check_node(dest)?;
    let tree = tree_to(network, dest, metric);
    if !tree.reachable[origin.index()] {
        return Err(NetworkError::UnreachableDestination { from: origin, to: dest });
    }
    let mut nodes = vec![origin];
    let mut edges = Vec::new();
    let mut u = origin;
    while u != dest {
        let e = EdgeId(tree.next_edge[u.index()]);
        edges.push(e);
        u = network.edge(e).to;
        nodes.push(u);
    }
    Ok(Route {
        nodes,
        edges,
        time: tree.time[origin.index()],
        fuel: tree.fuel[origin.index()],
        distance: tree.distance[origin.index()],
    })
}

/// All-pairs optimal routes under one metric, with the companion totals of
/// each route under the other metrics and a next-edge table for path
/// reconstruction.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    metric: Metric,
    n: usize,
    time: Vec<f64>,
    fuel: Vec<f64>,
    distance: Vec<f64>,
    next_edge: Vec<u32>,
}

impl CostMatrix {
    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, from: NodeId, to: NodeId) -> usize {
        from.index() * self.n + to.index()
    }

    /// Travel time (s) of the optimal route.
    #[inline]
    pub fn time(&self, from: NodeId, to: NodeId) -> f64 {
        self.time[self.at(from, to)]
    }

    /// Fuel (g) of the optimal route.
    #[inline]
    pub fn fuel(&self, from: NodeId, to: NodeId) -> f64 {
        self.fuel[self.at(from, to)]
    }

    #[inline]
    pub fn distance(&self, from: NodeId, to: NodeId) -> f64 {
        self.distance[self.at(from, to)]
    }

    /// Cost under the matrix's own metric.
    #[inline]
    pub fn cost(&self, from: NodeId, to: NodeId) -> f64 {
        match self.metric {
            Metric::Time => self.time(from, to),
            Metric::Fuel => self.fuel(from, to),
            Metric::Distance => self.distance(from, to),
        }
    }

    /// First edge of the optimal route, `None` when `from == to`.
    #[inline]
    pub fn next_edge(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        let e = self.next_edge[self.at(from, to)];
        (e != NO_EDGE).then_some(EdgeId(e))
    }

    pub fn route(&self, network: &RoadNetwork, from: NodeId, to: NodeId) -> Route {
        let mut nodes = vec![from];
        let mut edges = Vec::new();
        let mut u = from;
        while let Some(e) = self.next_edge(u, to) {
            edges.push(e);
            u = network.edge(e).to;
            nodes.push(u);
        }
        Route { nodes, edges, time: self.time(from, to), fuel: self.fuel(from, to), distance: self.distance(from, to) }
    }
}

/// Computes the all-pairs [`CostMatrix`] for `metric`, one reverse Dijkstra
/// per destination.
pub fn all_pairs_costs(network: &RoadNetwork, metric: Metric) -> Result<CostMatrix, NetworkError> {
    let n = network.node_count();
    let mut m = CostMatrix {
        metric,
        n,
        time: vec![0.0; n * n],
        fuel: vec![0.0; n * n],
        distance: vec![0.0; n * n],
        next_edge: vec![NO_EDGE; n * n],
    };
    for j in 0..n {
        let dest = NodeId(j as u32);
        let tree = tree_to(network, dest, metric);
        for i in 0..n {
            if !tree.reachable[i] {
                return Err(NetworkError::UnreachableDestination { from: NodeId(i as u32), to: dest });
            }
            let k = i * n + j;
            m.time[k] = tree.time[i];
            m.fuel[k] = tree.fuel[i];
            m.distance[k] = tree.distance[i];
            m.next_edge[k] = tree.next_edge[i];
        }
    }
    Ok(m)
}

/// Fastest, eco and shortest-distance matrices, computed once per network.
#[derive(Debug, Clone)]
pub struct RoutingTables {
    pub fastest: CostMatrix,
    pub eco: CostMatrix,
    pub shortest: CostMatrix,
}

impl RoutingTables {
    pub fn build(network: &RoadNetwork) -> Result<Self, NetworkError> {
        Ok(Self {
            fastest: all_pairs_costs(network, Metric::Time)?,
            eco: all_pairs_costs(network, Metric::Fuel)?,
            shortest: all_pairs_costs(network, Metric::Distance)?,
        })
    }

    #[inline]
    pub fn get(&self, metric: Metric) -> &CostMatrix {
        match metric {
            Metric::Time => &self.fastest,
            Metric::Fuel => &self.eco,
            Metric::Distance => &self.shortest,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::test_util::{line, random_network};
    use crate::network::{Edge, Node};

    /// Bellman-Ford style exhaustive relaxation, independent of Dijkstra.
    fn relaxation_oracle(network: &RoadNetwork, origin: NodeId, metric: Metric) -> Vec<f64> {
        let n = network.node_count();
        let mut d = vec![f64::INFINITY; n];
        d[origin.index()] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for (i, e) in network.edges().iter().enumerate() {
                let c = d[e.from.index()] + network.edge_cost(EdgeId(i as u32), metric);
                if c < d[e.to.index()] {
                    d[e.to.index()] = c;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        d
    }

    #[test]
    fn identity_route_is_empty() {
        let net = line(&[(100.0, 10.0)]);
        let r = shortest_path(&net, NodeId(1), NodeId(1), Metric::Time).unwrap();
        assert_eq!(r.nodes, vec![NodeId(1)]);
        assert!(r.edges.is_empty());
        assert_eq!((r.time, r.fuel), (0.0, 0.0));
    }

    #[test]
    fn single_edge_time() {
        let net = RoadNetwork::new(
            vec![Node { x: 0.0, y: 0.0 }, Node { x: 1000.0, y: 0.0 }],
            vec![Edge { from: NodeId(0), to: NodeId(1), length: 1000.0, speed: 10.0, lanes: 1 }],
        )
        .unwrap();
        let r = shortest_path(&net, NodeId(0), NodeId(1), Metric::Time).unwrap();
        assert_eq!(r.time, 100.0);
        assert_eq!(r.fuel, net.edge_fuel(EdgeId(0)));
        assert_eq!(
            shortest_path(&net, NodeId(1), NodeId(0), Metric::Time).unwrap_err(),
            NetworkError::UnreachableDestination { from: NodeId(1), to: NodeId(0) }
        );
    }

    #[test]
    fn matches_relaxation_oracle_on_random_graphs() {
        for seed in 0..5 {
            let net = random_network(50, 120, seed);
            for metric in [Metric::Time, Metric::Fuel, Metric::Distance] {
                for o in [0u32, 7, 23, 49] {
                    let oracle = relaxation_oracle(&net, NodeId(o), metric);
                    for d in 0..50u32 {
                        let r = shortest_path(&net, NodeId(o), NodeId(d), metric).unwrap();
                        let got = match metric {
                            Metric::Time => r.time,
                            Metric::Fuel => r.fuel,
                            Metric::Distance => r.distance,
                        };
                        assert!((got - oracle[d as usize]).abs() <= 1e-9 * oracle[d as usize].max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn route_totals_are_edge_sums() {
        let net = random_network(30, 60, 3);
        let r = shortest_path(&net, NodeId(2), NodeId(17), Metric::Fuel).unwrap();
        let time: f64 = r.edges.iter().map(|&e| net.edge(e).travel_time()).sum();
        let fuel: f64 = r.edges.iter().map(|&e| net.edge_fuel(e)).sum();
        assert!((time - r.time).abs() <= 1e-9 * time);
        assert!((fuel - r.fuel).abs() <= 1e-9 * fuel);
        for w in r.nodes.windows(2) {
            assert!(net.out_edges(w[0]).iter().any(|&e| net.edge(e).to == w[1]));
        }
    }

    #[test]
    fn one_node_matrix() {
        let net = RoadNetwork::new(vec![Node { x: 0.0, y: 0.0 }], vec![]).unwrap();
        let m = all_pairs_costs(&net, Metric::Time).unwrap();
        assert_eq!(m.size(), 1);
        assert_eq!(m.time(NodeId(0), NodeId(0)), 0.0);
    }

    #[test]
    fn line_matrix_by_hand() {
        let net = line(&[(100.0, 10.0), (300.0, 15.0)]);
        let m = all_pairs_costs(&net, Metric::Time).unwrap();
        assert_eq!(m.time(NodeId(0), NodeId(2)), 10.0 + 20.0);
        assert_eq!(m.time(NodeId(2), NodeId(1)), 20.0);
        assert_eq!(m.distance(NodeId(0), NodeId(2)), 400.0);
        assert_eq!(m.time(NodeId(1), NodeId(1)), 0.0);
    }

    #[test]
    fn matrix_matches_pairwise_queries() {
        let net = random_network(30, 70, 11);
        for metric in [Metric::Time, Metric::Fuel] {
            let m = all_pairs_costs(&net, metric).unwrap();
            for i in net.node_ids() {
                for j in net.node_ids() {
                    let r = shortest_path(&net, i, j, metric).unwrap();
                    assert_eq!(m.time(i, j), r.time);
                    assert_eq!(m.fuel(i, j), r.fuel);
                    assert_eq!(m.route(&net, i, j).nodes, r.nodes);
                }
            }
        }
    }

    #[test]
    fn disconnected_pairs_error() {
        let net = RoadNetwork::new(
            vec![Node { x: 0.0, y: 0.0 }, Node { x: 1.0, y: 0.0 }],
            vec![Edge { from: NodeId(0), to: NodeId(1), length: 1.0, speed: 1.0, lanes: 1 }],
        )
        .unwrap();
        assert!(matches!(all_pairs_costs(&net, Metric::Time), Err(NetworkError::UnreachableDestination { .. })));
    }

    #[test]
    fn ties_prefer_smallest_node_sequence() {
        // Diamond 0 -> {1,2} -> 3 with identical costs.
        let nodes = (0..4).map(|i| Node { x: i as f64, y: 0.0 }).collect();
        let e = |a: u32, b: u32| Edge { from: NodeId(a), to: NodeId(b), length: 100.0, speed: 10.0, lanes: 1 };
        let net = RoadNetwork::new(nodes, vec![e(0, 2), e(2, 3), e(0, 1), e(1, 3)]).unwrap();
        let r = shortest_path(&net, NodeId(0), NodeId(3), Metric::Time).unwrap();
        assert_eq!(r.nodes, vec![NodeId(0), NodeId(1), NodeId(3)]);
    }

    #[test]
    fn eco_and_fastest_dominance() {
        let net = random_network(40, 90, 5);
        let t = RoutingTables::build(&net).unwrap();
        for i in net.node_ids() {
            for j in net.node_ids() {
                assert!(t.eco.fuel(i, j) <= t.fastest.fuel(i, j) * (1.0 + 1e-9) + 1e-12);
                assert!(t.fastest.time(i, j) <= t.eco.time(i, j) * (1.0 + 1e-9) + 1e-12);
            }
        }
    }

    #[test]
    fn triangle_inequality_for_optimized_metric() {
        let net = random_network(25, 50, 8);
        let t = RoutingTables::build(&net).unwrap();
        for m in [&t.fastest, &t.eco, &t.shortest] {
            for a in net.node_ids() {
                for b in net.node_ids() {
                    for c in net.node_ids() {
                        assert!(m.cost(a, c) <= m.cost(a, b) + m.cost(b, c) + 1e-9 * m.cost(a, c).max(1.0));
                    }
                }
            }
        }
    }
}
