//! OD-flow and route-choice calibration from measured link speeds.
//!
//! Measured speeds become link flows through the speed–density model; OD
//! flows split between each pair's shortest-distance route and its empirical
//! shortest-time route are then fitted to those link flows by least squares,
//! regularized toward a prior, with the prior's total flow preserved.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{flow_rate, SpeedDensityModel};
use crate::network::{shortest_path, EdgeId, Metric, NetworkError, NodeId, RoadNetwork};
use crate::optim::{OptimError, SimplexQp};

pub const DEFAULT_PSI: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("speed {speed} is at or below the congested plateau; density is not identifiable")]
    CongestedAmbiguity { speed: f64 },
    #[error("invalid calibration problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// Flow (veh/s) on a link whose normalized mean speed is `normalized_speed`.
///
/// Inverts the sub-critical branch of `model` for the density, then applies
/// `q = lanes * rho * v`.
pub fn link_flow_from_speed(normalized_speed: f64, free_speed: f64, lanes: u32, model: &SpeedDensityModel) -> Result<f64, CalibrationError> {
    if !normalized_speed.is_finite() || normalized_speed <= model.epsilon {
        return Err(CalibrationError::CongestedAmbiguity { speed: normalized_speed });
    }
    if normalized_speed > 1.0 + 1e-12 {
        return Err(CalibrationError::Invalid(format!("normalized speed {normalized_speed} above 1")));
    }
    let rho = model.invert(normalized_speed).ok_or(CalibrationError::CongestedAmbiguity { speed: normalized_speed })?;
    Ok(flow_rate(rho, normalized_speed * free_speed, lanes))
}

/// Speed samples of one link, normalized by its free-flow speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMeasurement {
    pub edge: EdgeId,
    pub samples: Vec<f64>,
}

impl LinkMeasurement {
    pub fn mean(&self) -> Option<f64> {
        (!self.samples.is_empty()).then(|| self.samples.iter().sum::<f64>() / self.samples.len() as f64)
    }
}

/// Target flows for every measured link with at least `min_samples` samples
/// and an identifiable density. Excluded links are reported with the reason.
pub fn target_link_flows(
    network: &RoadNetwork,
    measurements: &[LinkMeasurement],
    model: &SpeedDensityModel,
    min_samples: usize,
) -> (BTreeMap<EdgeId, f64>, Vec<(EdgeId, CalibrationError)>) {
    let mut targets = BTreeMap::new();
    let mut excluded = Vec::new();
    for m in measurements {
        if m.samples.len() < min_samples.max(1) {
            excluded.push((m.edge, CalibrationError::Invalid(format!("{} samples", m.samples.len()))));
            continue;
        }
        let e = network.edge(m.edge);
        match link_flow_from_speed(m.mean().unwrap_or(0.0), e.speed, e.lanes, model) {
            Ok(q) => {
                targets.insert(m.edge, q);
            }
            Err(err) => excluded.push((m.edge, err)),
        }
    }
    (targets, excluded)
}

/// One OD pair with the links of its two candidate routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdPair {
    pub origin: NodeId,
    pub destination: NodeId,
    pub distance_route: Vec<EdgeId>,
    pub time_route: Vec<EdgeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdFlowProblem {
    pub pairs: Vec<OdPair>,
    /// Target flow of each measured link; unmeasured links do not enter the fit.
    pub targets: BTreeMap<EdgeId, f64>,
    pub prior: Vec<f64>,
    pub psi: f64,
}

/// Calibrated flows per OD pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdFlows {
    pub distance: Vec<f64>,
    pub time: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
}

impl OdFlows {
    pub fn totals(&self) -> Vec<f64> {
        self.distance.iter().zip(&self.time).map(|(d, t)| d + t).collect()
    }

    /// Share of each pair's flow on the shortest-distance route.
    pub fn distance_share(&self) -> Vec<f64> {
        self.totals().iter().zip(&self.distance).map(|(q, d)| if *q > 0.0 { d / q } else { 0.5 }).collect()
    }
}

impl OdFlowProblem {
    /// Candidate routes per pair: shortest distance on `network`, and shortest
    /// time on a copy whose speeds are the measured mean speeds (posted speed
    /// where a link has no measurement).
    pub fn from_network(
        network: &RoadNetwork,
        pairs: &[(NodeId, NodeId)],
        measured_speed: &BTreeMap<EdgeId, f64>,
        targets: BTreeMap<EdgeId, f64>,
        prior: Vec<f64>,
        psi: f64,
    ) -> Result<Self, CalibrationError> {
        let empirical = network.with_speeds(|id, e| measured_speed.get(&id).copied().filter(|v| *v > 0.0).unwrap_or(e.speed))?;
        let pairs = pairs
            .iter()
            .map(|&(o, d)| {
                Ok(OdPair {
                    origin: o,
                    destination: d,
                    distance_route: shortest_path(network, o, d, Metric::Distance)?.edges,
                    time_route: shortest_path(&empirical, o, d, Metric::Time)?.edges,
                })
            })
            .collect::<Result<Vec<_>, NetworkError>>()?;
        let p = Self { pairs, targets, prior, psi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.prior.len() != self.pairs.len() {
            return Err(CalibrationError::Invalid("one prior flow per OD pair".into()));
        }
        if self.prior.iter().any(|q| !q.is_finite() || *q < 0.0) || self.prior.iter().sum::<f64>() <= 0.0 {
            return Err(CalibrationError::Optim(OptimError::InfeasibleProgram));
        }
        if !(self.psi >= 0.0) || self.targets.values().any(|q| !q.is_finite() || *q < 0.0) {
            return Err(CalibrationError::Invalid("psi and targets must be non-negative".into()));
        }
        Ok(())
    }

    pub fn total_prior(&self) -> f64 {
        self.prior.iter().sum()
    }

    /// Measured links, in target order.
    fn links(&self) -> Vec<EdgeId> {
        self.targets.keys().copied().collect()
    }

    /// Incidence of the measured links on the variables `[d_0, t_0, d_1, t_1, ...]`.
    fn incidence(&self) -> DMatrix<f64> {
        let row: BTreeMap<EdgeId, usize> = self.links().into_iter().enumerate().map(|(i, e)| (e, i)).collect();
        let mut m = DMatrix::zeros(row.len(), 2 * self.pairs.len());
        for (k, p) in self.pairs.iter().enumerate() {
            for (col, route) in [(2 * k, &p.distance_route), (2 * k + 1, &p.time_route)] {
                for e in route {
                    if let Some(&r) = row.get(e) {
                        m[(r, col)] = 1.0;
                    }
                }
            }
        }
        m
    }

    /// Flow on every measured link for the given per-pair route flows.
    pub fn link_flows(&self, distance: &[f64], time: &[f64]) -> BTreeMap<EdgeId, f64> {
        let mut q: BTreeMap<EdgeId, f64> = self.targets.keys().map(|e| (*e, 0.0)).collect();
        for (k, p) in self.pairs.iter().enumerate() {
            for (flow, route) in [(distance[k], &p.distance_route), (time[k], &p.time_route)] {
                for e in route {
                    if let Some(v) = q.get_mut(e) {
                        *v += flow;
                    }
                }
            }
        }
        q
    }

    /// Calibration objective evaluated directly from its definition.
    pub fn objective(&self, distance: &[f64], time: &[f64]) -> f64 {
        let fit: f64 = self.link_flows(distance, time).iter().map(|(e, q)| (q - self.targets[e]).powi(2)).sum();
        let reg: f64 = (0..self.pairs.len()).map(|k| (distance[k] + time[k] - self.prior[k]).powi(2)).sum();
        fit + self.psi * reg
    }

    /// The calibration as `0.5 x'Qx + c'x` over the scaled simplex
    /// `{x >= 0, sum(x) = total prior}`.
    pub fn to_qp(&self) -> Result<SimplexQp, CalibrationError> {
        self.validate()?;
        let n = 2 * self.pairs.len();
        let m = self.incidence();
        let qhat = DVector::from_iterator(self.targets.len(), self.targets.values().copied());
        let mut s = DMatrix::zeros(self.pairs.len(), n);
        for k in 0..self.pairs.len() {
            s[(k, 2 * k)] = 1.0;
            s[(k, 2 * k + 1)] = 1.0;
        }
        let prior = DVector::from_column_slice(&self.prior);
        let q = (m.transpose() * &m + s.transpose() * &s * self.psi) * 2.0;
        let c = (m.transpose() * qhat + s.transpose() * prior * self.psi) * -2.0;
        Ok(SimplexQp::new(q, c, vec![(0..n).collect()], vec![self.total_prior()])?)
    }
}

/// Solves the calibration QP starting from the prior split evenly between the
/// two routes of each pair.
pub fn calibrate_od_flows(problem: &OdFlowProblem) -> Result<OdFlows, CalibrationError> {
    let qp = problem.to_qp()?;
    let start = DVector::from_iterator(qp.dim(), problem.prior.iter().flat_map(|q| [0.5 * q, 0.5 * q]));
    let sol = qp.solve(Some(&start))?;
    let distance: Vec<f64> = (0..problem.pairs.len()).map(|k| sol.x[2 * k]).collect();
    let time: Vec<f64> = (0..problem.pairs.len()).map(|k| sol.x[2 * k + 1]).collect();
    let objective = problem.objective(&distance, &time);
    Ok(OdFlows { distance, time, objective, kkt_residual: sol.kkt_residual })
}

/// Grid search over real-time routing ratios: returns the candidate whose
/// simulated link speeds have the least squared error against `measured`,
/// the smaller ratio on ties. Panics on an empty candidate list.
pub fn estimate_realtime_ratio(candidates: &[f64], mut simulate: impl FnMut(f64) -> Vec<f64>, measured: &[f64]) -> f64 {
    assert!(!candidates.is_empty(), "no candidate ratios");
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (f64::INFINITY, sorted[0]);
    for r in sorted {
        let sim = simulate(r);
        let err: f64 = sim.iter().zip(measured).map(|(s, m)| (s - m).powi(2)).sum();
        if err < best.0 {
            best = (err, r);
        }
    }
    best.1
}

/// Static macroscopic loading used to synthesize link speeds.
///
/// Each OD flow (veh/s) is split: `ratio` of it takes the free-flow fastest
/// route and the rest the shortest-distance route. Every link's density is the
/// smallest sub-critical root of `q = lanes * rho * v_f * v(rho)`; links loaded
/// beyond capacity sit at the congested plateau. Returns normalized speeds in
/// edge order.
pub fn load_network(network: &RoadNetwork, od: &[(NodeId, NodeId, f64)], ratio: f64, model: &SpeedDensityModel) -> Result<Vec<f64>, CalibrationError> {
    let mut q = vec![0.0; network.edge_count()];
    for &(o, d, flow) in od {
        for (share, metric) in [(1.0 - ratio, Metric::Distance), (ratio, Metric::Time)] {
            if share > 0.0 {
                for e in shortest_path(network, o, d, metric)?.edges {
                    q[e.index()] += share * flow;
                }
            }
        }
    }
    Ok(network
        .edges()
        .iter()
        .zip(q)
        .map(|(e, flow)| {
            let carried = |rho: f64| flow_rate(rho, model.mean_speed(rho) * e.speed, e.lanes);
            // Flow increases up to its peak; search the root below it.
            let (rho_peak, peak) = (0..=2000)
                .map(|i| model.rho_critical * i as f64 / 2000.0)
                .map(|r| (r, carried(r)))
                .fold((0.0, 0.0), |best, c| if c.1 > best.1 { c } else { best });
            if flow >= peak {
                return model.epsilon;
            }
            let (mut lo, mut hi) = (0.0, rho_peak);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if carried(mid) < flow {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            model.mean_speed(0.5 * (lo + hi))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::test_util::random_network;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn free_flow_means_no_flow() {
        let m = SpeedDensityModel::default();
        assert_eq!(link_flow_from_speed(1.0, 15.0, 2, &m), Ok(0.0));
    }

    #[test]
    fn plateau_speed_is_ambiguous() {
        let m = SpeedDensityModel::default();
        assert_eq!(link_flow_from_speed(m.epsilon, 15.0, 2, &m), Err(CalibrationError::CongestedAmbiguity { speed: m.epsilon }));
        assert!(matches!(link_flow_from_speed(0.05, 15.0, 2, &m), Err(CalibrationError::CongestedAmbiguity { .. })));
    }

    #[test]
    fn forward_then_invert_recovers_density() {
        let m = SpeedDensityModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let rho = rng.random_range(0.0..m.rho_critical);
            let v = m.mean_speed(rho);
            if v <= m.epsilon {
                continue;
            }
            let lanes = rng.random_range(1..4);
            let vf = rng.random_range(8.0..30.0);
            let q = link_flow_from_speed(v, vf, lanes, &m).unwrap();
            let back = q / (lanes as f64 * v * vf);
            assert!((back - rho).abs() < 1e-9, "{back} vs {rho}");
        }
    }

    fn pair(o: u32, d: u32, dist: &[u32], time: &[u32]) -> OdPair {
        OdPair {
            origin: NodeId(o),
            destination: NodeId(d),
            distance_route: dist.iter().map(|&e| EdgeId(e)).collect(),
            time_route: time.iter().map(|&e| EdgeId(e)).collect(),
        }
    }

    #[test]
    fn single_pair_matching_prior() {
        // Both routes over one link measured at the prior flow.
        let p = OdFlowProblem { pairs: vec![pair(0, 1, &[0], &[0])], targets: BTreeMap::from([(EdgeId(0), 5.0)]), prior: vec![5.0], psi: 0.1 };
        let s = calibrate_od_flows(&p).unwrap();
        assert!((s.totals()[0] - 5.0).abs() < 1e-12);
        assert!(s.objective < 1e-20);
        // Separate links pin the split.
        let p = OdFlowProblem {
            pairs: vec![pair(0, 1, &[0], &[1])],
            targets: BTreeMap::from([(EdgeId(0), 1.5), (EdgeId(1), 3.5)]),
            prior: vec![5.0],
            psi: 0.1,
        };
        let s = calibrate_od_flows(&p).unwrap();
        assert!((s.distance[0] - 1.5).abs() < 1e-9 && (s.time[0] - 3.5).abs() < 1e-9);
    }

    #[test]
    fn prior_only_returns_prior() {
        let p = OdFlowProblem { pairs: vec![pair(0, 1, &[0], &[1]), pair(1, 0, &[2], &[3])], targets: BTreeMap::new(), prior: vec![2.0, 6.0], psi: 0.1 };
        let s = calibrate_od_flows(&p).unwrap();
        assert_eq!(s.totals(), vec![2.0, 6.0]);
    }

    #[test]
    fn empty_prior_is_infeasible() {
        let p = OdFlowProblem { pairs: vec![pair(0, 1, &[0], &[1])], targets: BTreeMap::new(), prior: vec![0.0], psi: 0.1 };
        assert_eq!(calibrate_od_flows(&p), Err(CalibrationError::Optim(OptimError::InfeasibleProgram)));
    }

    /// Random pairs over `links` links with planted positive flows.
    fn planted(rng: &mut ChaCha8Rng, pairs: usize, links: u32) -> (OdFlowProblem, Vec<f64>, Vec<f64>) {
        let route = |rng: &mut ChaCha8Rng| {
            let mut r: Vec<u32> = (0..links).filter(|_| rng.random_bool(0.3)).collect();
            if r.is_empty() {
                r.push(rng.random_range(0..links));
            }
            r
        };
        let ps: Vec<OdPair> = (0..pairs)
            .map(|k| {
                let d = route(rng);
                let t = route(rng);
                pair(k as u32, k as u32 + 1, &d, &t)
            })
            .collect();
        let d: Vec<f64> = (0..pairs).map(|_| rng.random_range(0.5..5.0)).collect();
        let t: Vec<f64> = (0..pairs).map(|_| rng.random_range(0.5..5.0)).collect();
        let mut p = OdFlowProblem { pairs: ps, targets: (0..links).map(|l| (EdgeId(l), 0.0)).collect(), prior: vec![], psi: 1e-9 };
        p.targets = p.link_flows(&d, &t);
        // A perturbed prior with the planted total.
        let total: f64 = d.iter().zip(&t).map(|(a, b)| a + b).sum();
        let mut prior: Vec<f64> = d.iter().zip(&t).map(|(a, b)| (a + b) * rng.random_range(0.7..1.3)).collect();
        let s: f64 = prior.iter().sum();
        prior.iter_mut().for_each(|q| *q *= total / s);
        p.prior = prior;
        (p, d, t)
    }

    #[test]
    fn planted_link_flows_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let (pairs, links) = (rng.random_range(1..6), rng.random_range(3..12));
            let (p, d, t) = planted(&mut rng, pairs, links);
            let s = calibrate_od_flows(&p).unwrap();
            assert!(s.kkt_residual <= 1e-6);
            let truth = p.link_flows(&d, &t);
            let got = p.link_flows(&s.distance, &s.time);
            for (e, q) in &truth {
                assert!((got[e] - q).abs() < 1e-6, "{} vs {}", got[e], q);
            }
            assert!((s.totals().iter().sum::<f64>() - p.total_prior()).abs() < 1e-9);
            assert!(s.distance.iter().chain(&s.time).all(|q| *q >= 0.0));
        }
    }

    #[test]
    fn heavy_regularization_returns_prior_totals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (mut p, _, _) = planted(&mut rng, 4, 8);
            p.psi = 1e6;
            // Targets far from the prior's implied link flows.
            p.targets.values_mut().for_each(|q| *q *= 2.0);
            let s = calibrate_od_flows(&p).unwrap();
            for (a, b) in s.totals().iter().zip(&p.prior) {
                assert!((a - b).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn solution_beats_prior_and_keeps_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let (mut p, _, _) = planted(&mut rng, 5, 10);
            p.psi = rng.random_range(0.01..10.0);
            p.targets.values_mut().for_each(|q| *q *= rng.random_range(0.5..1.5));
            let s = calibrate_od_flows(&p).unwrap();
            let half: Vec<f64> = p.prior.iter().map(|q| 0.5 * q).collect();
            assert!(s.objective <= p.objective(&half, &half) + 1e-9);
            assert!((s.totals().iter().sum::<f64>() - p.total_prior()).abs() < 1e-9);
            assert!(s.distance.iter().chain(&s.time).all(|q| *q >= 0.0));
        }
    }

    #[test]
    fn qp_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let (mut p, _, _) = planted(&mut rng, 4, 9);
            p.psi = rng.random_range(0.01..2.0);
            let qp = p.to_qp().unwrap();
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..4.0)).collect();
            let g = qp.gradient(&DVector::from_column_slice(&x));
            let f = |x: &[f64]| {
                let d: Vec<f64> = x.iter().step_by(2).copied().collect();
                let t: Vec<f64> = x.iter().skip(1).step_by(2).copied().collect();
                p.objective(&d, &t)
            };
            for i in 0..8 {
                let h = 1e-5;
                let (mut a, mut b) = (x.clone(), x.clone());
                a[i] += h;
                b[i] -= h;
                let fd = (f(&a) - f(&b)) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0), "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn routes_from_network_use_measured_speeds() {
        let net = random_network(15, 20, 4);
        let pairs = [(NodeId(0), NodeId(7)), (NodeId(3), NodeId(12))];
        // Slow every edge of the free-flow fastest route of the first pair.
        let fast = shortest_path(&net, NodeId(0), NodeId(7), Metric::Time).unwrap();
        let measured: BTreeMap<EdgeId, f64> = fast.edges.iter().map(|e| (*e, 0.1)).collect();
        let p = OdFlowProblem::from_network(&net, &pairs, &measured, BTreeMap::new(), vec![1.0, 1.0], 0.1).unwrap();
        assert_eq!(p.pairs[0].distance_route, shortest_path(&net, NodeId(0), NodeId(7), Metric::Distance).unwrap().edges);
        assert_ne!(p.pairs[0].time_route, fast.edges);
    }

    #[test]
    fn ratio_search() {
        assert_eq!(estimate_realtime_ratio(&[0.4], |_| vec![1.0], &[0.0]), 0.4);
        assert_eq!(estimate_realtime_ratio(&[0.6, 0.2, 0.4], |_| vec![1.0, 2.0], &[0.0, 0.0]), 0.2);
        let net = random_network(20, 30, 6);
        let m = SpeedDensityModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let od: Vec<(NodeId, NodeId, f64)> =
            (0..25).map(|_| (NodeId(rng.random_range(0..20)), NodeId(rng.random_range(0..20)), rng.random_range(0.01..0.06))).collect();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        for &truth in &[0.0, 0.3, 0.7, 1.0] {
            let measured = load_network(&net, &od, truth, &m).unwrap();
            let got = estimate_realtime_ratio(&grid, |r| load_network(&net, &od, r, &m).unwrap(), &measured);
            assert_eq!(got, truth);
        }
    }

    #[test]
    fn loader_is_consistent_with_flow_inversion() {
        let net = random_network(12, 15, 7);
        let m = SpeedDensityModel::default();
        let od = [(NodeId(0), NodeId(6), 0.3), (NodeId(2), NodeId(9), 0.2)];
        let speeds = load_network(&net, &od, 0.5, &m).unwrap();
        let mut flows = vec![0.0; net.edge_count()];
        for &(o, d, q) in &od {
            for metric in [Metric::Distance, Metric::Time] {
                for e in shortest_path(&net, o, d, metric).unwrap().edges {
                    flows[e.index()] += 0.5 * q;
                }
            }
        }
        for (i, e) in net.edges().iter().enumerate() {
            if speeds[i] > m.epsilon {
                let q = link_flow_from_speed(speeds[i], e.speed, e.lanes, &m).unwrap();
                assert!((q - flows[i]).abs() < 1e-9, "{q} vs {}", flows[i]);
            }
        }
    }
}
