//! Shareability graph over pending requests and vehicles, and enumeration of
//! vehicle-anchored cliques (candidate trips).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::demand::{RequestId, TravelRequest};
use crate::scheduler::{solve_tsp_dp, Objective, SchedulerParams, TravelCosts, VehicleId, VehicleStart, SCHEDULE_SLACK};

/// Undirected graph with request–request and vehicle–request edges, indexed by
/// position in `requests` and `vehicles`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShareabilityGraph {
    pub requests: Vec<RequestId>,
    pub vehicles: Vec<VehicleId>,
    /// Seats each vehicle can still promise.
    pub spare: Vec<usize>,
    /// Sorted request neighbors of each request.
    pub rr: Vec<Vec<usize>>,
    /// Sorted request neighbors of each vehicle.
    pub rv: Vec<Vec<usize>>,
}

/// One vehicle plus requests that are pairwise shareable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Clique {
    pub vehicle: VehicleId,
    pub requests: Vec<RequestId>,
}

impl ShareabilityGraph {
    /// Builds a graph from explicit edges (`rr` pairs of request indices,
    /// `rv` pairs of (vehicle, request) indices).
    pub fn from_edges(
        requests: Vec<RequestId>,
        vehicles: Vec<VehicleId>,
        spare: Vec<usize>,
        rr: &[(usize, usize)],
        rv: &[(usize, usize)],
    ) -> Self {
        let mut g = Self {
            rr: vec![Vec::new(); requests.len()],
            rv: vec![Vec::new(); vehicles.len()],
            requests,
            vehicles,
            spare,
        };
        for &(a, b) in rr {
            if a != b {
                g.rr[a].push(b);
                g.rr[b].push(a);
            }
        }
        for &(v, r) in rv {
            g.rv[v].push(r);
        }
        for l in g.rr.iter_mut().chain(g.rv.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        g
    }

    pub fn has_rr(&self, a: usize, b: usize) -> bool {
        self.rr[a].binary_search(&b).is_ok()
    }

    pub fn has_rv(&self, v: usize, r: usize) -> bool {
        self.rv[v].binary_search(&r).is_ok()
    }

    pub fn rr_edge_count(&self) -> usize {
        self.rr.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn rv_edge_count(&self) -> usize {
        self.rv.iter().map(Vec::len).sum()
    }

    /// Edge list text dump (`r<a> r<b>` and `v<i> r<a>` lines).
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (a, ns) in self.rr.iter().enumerate() {
            for &b in ns.iter().filter(|&&b| b > a) {
                out += &format!("{} {}\n", self.requests[a], self.requests[b]);
            }
        }
        for (v, ns) in self.rv.iter().enumerate() {
            for &r in ns {
                out += &format!("{} {}\n", self.vehicles[v], self.requests[r]);
            }
        }
        out
    }
}

fn time_params(params: &SchedulerParams) -> SchedulerParams {
    SchedulerParams { objective: Objective::Time, ..*params }
}

/// Whether an empty vehicle starting at either origin can serve both requests
/// within their limits. The virtual vehicle starts at the later of the two
/// request times and `clock`, since no real vehicle can start earlier.
pub fn rr_edge<C: TravelCosts + ?Sized>(
    r1: &TravelRequest,
    r2: &TravelRequest,
    costs: &C,
    clock: f64,
    params: &SchedulerParams,
) -> bool {
    if params.capacity < 2 {
        return false;
    }
    let start = r1.request_time.max(r2.request_time).max(clock);
    let p = time_params(params);
    [r1.origin, r2.origin].iter().any(|&o| {
        let v = VehicleStart::idle(VehicleId(u32::MAX), o, start);
        solve_tsp_dp(&v, &[r1.clone(), r2.clone()], costs, &p).is_ok()
    })
}

/// Whether `r` can join the vehicle's current commitments with every limit met.
pub fn rv_edge<C: TravelCosts + ?Sized>(v: &VehicleStart, r: &TravelRequest, costs: &C, params: &SchedulerParams) -> bool {
    if v.committed() >= params.capacity {
        return false;
    }
    if v.time + costs.min_time(v.node, r.origin) > r.pickup_deadline() - SCHEDULE_SLACK {
        return false;
    }
    solve_tsp_dp(v, std::slice::from_ref(r), costs, &time_params(params)).is_ok()
}

/// Builds the graph for one batch.
///
/// With `max_vehicles_per_request = Some(k)`, each request keeps edges only
/// to the `k` vehicles that can reach its origin soonest (among those passing
/// the full feasibility check); `None` keeps every feasible edge.
pub fn build_graph<C: TravelCosts + ?Sized>(
    requests: &[TravelRequest],
    vehicles: &[VehicleStart],
    costs: &C,
    clock: f64,
    params: &SchedulerParams,
    max_vehicles_per_request: Option<usize>,
) -> ShareabilityGraph {
    let mut rr = Vec::new();
    for i in 0..requests.len() {
        for j in i + 1..requests.len() {
            if rr_edge(&requests[i], &requests[j], costs, clock, params) {
                rr.push((i, j));
            }
        }
    }
    let mut rv = Vec::new();
    for (ri, r) in requests.iter().enumerate() {
        let mut reachable: Vec<(f64, usize)> = vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| v.committed() < params.capacity)
            .map(|(vi, v)| (v.time + costs.min_time(v.node, r.origin), vi))
            .filter(|&(t, _)| t <= r.pickup_deadline() - SCHEDULE_SLACK)
            .collect();
        reachable.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut kept = 0;
        for (_, vi) in reachable {
            if max_vehicles_per_request.is_some_and(|k| kept >= k) {
                break;
            }
            if rv_edge(&vehicles[vi], r, costs, params) {
                rv.push((vi, ri));
                kept += 1;
            }
        }
    }
    ShareabilityGraph::from_edges(
        requests.iter().map(|r| r.id).collect(),
        vehicles.iter().map(|v| v.id).collect(),
        vehicles.iter().map(|v| params.capacity.saturating_sub(v.committed())).collect(),
        &rr,
        &rv,
    )
}

type Bits = Vec<u64>;

fn bits_new(n: usize) -> Bits {
    vec![0; n.div_ceil(64)]
}

fn bits_set(b: &mut Bits, i: usize) {
    b[i / 64] |= 1 << (i % 64);
}

fn bits_iter(b: &Bits) -> impl Iterator<Item = usize> + '_ {
    b.iter().enumerate().flat_map(|(w, &word)| {
        let mut word = word;
        std::iter::from_fn(move || {
            (word != 0).then(|| {
                let i = word.trailing_zeros() as usize;
                word &= word - 1;
                w * 64 + i
            })
        })
    })
}

fn bits_and(a: &Bits, b: &Bits) -> Bits {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

fn bits_count(b: &Bits) -> u32 {
    b.iter().map(|w| w.count_ones()).sum()
}

fn bits_empty(b: &Bits) -> bool {
    b.iter().all(|w| *w == 0)
}

/// Bron–Kerbosch with pivoting; reports maximal cliques of the graph given by
/// `adj` (local indices).
fn bron_kerbosch(r: &mut Vec<usize>, p: Bits, x: Bits, adj: &[Bits], out: &mut Vec<Vec<usize>>) {
    if bits_empty(&p) && bits_empty(&x) {
        out.push(r.clone());
        return;
    }
    let pivot = bits_iter(&p).chain(bits_iter(&x)).max_by_key(|&u| (bits_count(&bits_and(&p, &adj[u])), std::cmp::Reverse(u)));
    let Some(u) = pivot else { return };
    let candidates: Vec<usize> = bits_iter(&p).filter(|&v| adj[u][v / 64] >> (v % 64) & 1 == 0).collect();
    let (mut p, mut x) = (p, x);
    for v in candidates {
        r.push(v);
        bron_kerbosch(r, bits_and(&p, &adj[v]), bits_and(&x, &adj[v]), adj, out);
        r.pop();
        p[v / 64] &= !(1 << (v % 64));
        bits_set(&mut x, v);
    }
}

fn subsets_up_to(items: &[usize], k: usize, prefix: &mut Vec<usize>, start: usize, out: &mut BTreeSet<Vec<usize>>) {
    if !prefix.is_empty() {
        out.insert(prefix.clone());
    }
    if prefix.len() == k {
        return;
    }
    for i in start..items.len() {
        prefix.push(items[i]);
        subsets_up_to(items, k, prefix, i + 1, out);
        prefix.pop();
    }
}

/// All cliques with exactly one vehicle and between 1 and
/// `min(max_customers, spare seats)` requests, sorted by vehicle then
/// request ids.
///
/// Maximal cliques of each vehicle's request neighborhood come from
/// Bron–Kerbosch; every small enough subset of them is a (not necessarily
/// maximal) clique.
pub fn enumerate_cliques(graph: &ShareabilityGraph, max_customers: usize) -> Vec<Clique> {
    let mut out = Vec::new();
    for (vi, neighbors) in graph.rv.iter().enumerate() {
        let k = max_customers.min(graph.spare[vi]);
        if k == 0 || neighbors.is_empty() {
            continue;
        }
        let m = neighbors.len();
        let adj: Vec<Bits> = neighbors
            .iter()
            .map(|&a| {
                let mut b = bits_new(m);
                for (j, &c) in neighbors.iter().enumerate() {
                    if graph.has_rr(a, c) {
                        bits_set(&mut b, j);
                    }
                }
                b
            })
            .collect();
        let mut all = bits_new(m);
        for j in 0..m {
            bits_set(&mut all, j);
        }
        let mut maximal = Vec::new();
        bron_kerbosch(&mut Vec::new(), all, bits_new(m), &adj, &mut maximal);
        let mut subsets = BTreeSet::new();
        for mut c in maximal {
            c.sort_unstable();
            subsets_up_to(&c, k, &mut Vec::new(), 0, &mut subsets);
        }
        let mut cliques: Vec<Clique> = subsets
            .into_iter()
            .map(|s| {
                let mut requests: Vec<RequestId> = s.iter().map(|&j| graph.requests[neighbors[j]]).collect();
                requests.sort_unstable();
                Clique { vehicle: graph.vehicles[vi], requests }
            })
            .collect();
        cliques.sort();
        out.extend(cliques);
    }
    out.sort();
    out
}
