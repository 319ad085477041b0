//! Active rebalancing of the idle fleet.
//!
//! Each idle vehicle either stays or relocates to the center of an adjacent
//! partition. The choice trades the squared gap between the predicted idle
//! distribution and the trip-origin distribution over the next `horizon`
//! intervals against relocation fuel. The fractional relaxation is a convex QP
//! over one simplex per vehicle; the plan is drawn from it by randomized
//! rounding.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{CostMatrix, NodeId, PartitionId, PartitionSet};
use crate::optim::{OptimError, SimplexQp};
use crate::scheduler::VehicleId;

#[derive(Debug, Error, PartialEq)]
pub enum RebalanceError {
    #[error("predicted idle fleet is empty at interval {tau}")]
    ZeroNormalizer { tau: usize },
    #[error("invalid rebalancing problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RebalanceParams {
    /// Fraction of a departing request that consumes a whole idle vehicle
    /// (below 1 because of sharing).
    pub gamma: f64,
    /// Look-ahead in assignment intervals.
    pub horizon: usize,
    /// Weight of relocation cost against balance.
    pub w_c: f64,
    /// Assignment interval, s.
    pub interval: f64,
    /// Multiplier turning relocation fuel (g) into objective units.
    pub fuel_scale: f64,
}

impl Default for RebalanceParams {
    fn default() -> Self {
        Self { gamma: 0.8, horizon: 5, w_c: 0.5, interval: 30.0, fuel_scale: 1e-4 }
    }
}

/// One relocation option of an idle vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Destination node, `None` for staying put.
    pub target: Option<NodeId>,
    /// Partition the vehicle ends up in.
    pub partition: PartitionId,
    /// Relocation cost in objective units.
    pub cost: f64,
    /// First interval (1-based) at which the vehicle counts in `partition`.
    pub arrival: usize,
}

impl Candidate {
    pub fn stay(home: PartitionId) -> Self {
        Self { target: None, partition: home, cost: 0.0, arrival: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdleVehicle {
    pub id: VehicleId,
    pub node: NodeId,
    pub home: PartitionId,
}

/// A vehicle that is busy now and predicted idle at `node` from time `free_at`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusyVehicle {
    pub node: NodeId,
    pub free_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceProblem {
    pub vehicles: Vec<IdleVehicle>,
    /// Per vehicle; the first candidate is the stay option.
    pub candidates: Vec<Vec<Candidate>>,
    /// Trip-origin share of each partition, summing to 1.
    pub origin_density: Vec<f64>,
    /// Expected departures per interval from each partition.
    pub departure_rates: Vec<f64>,
    /// `arrivals[tau - 1][k]`: busy vehicles predicted idle in `k` by interval `tau`.
    pub arrivals: Vec<Vec<f64>>,
    pub gamma: f64,
    pub horizon: usize,
    pub w_c: f64,
}

/// Predicted idle counts `counts[tau - 1][k]` and fleet totals `normalizers[tau - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdleCounts {
    pub counts: Vec<Vec<f64>>,
    pub normalizers: Vec<f64>,
}

/// Inputs describing the fleet and demand at one planning instant.
#[derive(Debug, Clone, Copy)]
pub struct RebalanceContext<'a> {
    pub partitions: &'a PartitionSet,
    /// Eco-route costs; relocation trips use eco routes.
    pub eco: &'a CostMatrix,
    pub origin_density: &'a [f64],
    /// Requests per second from each partition.
    pub request_rates: &'a [f64],
}

impl RebalanceProblem {
    /// Builds candidates (stay plus every adjacent partition's center) and the
    /// arrival forecast from the busy fleet.
    pub fn build(ctx: &RebalanceContext, idle: &[(VehicleId, NodeId)], busy: &[BusyVehicle], clock: f64, params: &RebalanceParams) -> Self {
        let k = ctx.partitions.len();
        let dt = params.interval;
        let vehicles: Vec<IdleVehicle> =
            idle.iter().map(|&(id, node)| IdleVehicle { id, node, home: ctx.partitions.partition_of(node) }).collect();
        let candidates = vehicles
            .iter()
            .map(|v| {
                let mut c = vec![Candidate::stay(v.home)];
                for &p in ctx.partitions.adjacent(v.home) {
                    let center = ctx.partitions.center(p);
                    let time = ctx.eco.time(v.node, center);
                    c.push(Candidate {
                        target: Some(center),
                        partition: p,
                        cost: params.fuel_scale * ctx.eco.fuel(v.node, center),
                        arrival: ((time / dt).ceil() as usize).max(1),
                    });
                }
                c
            })
            .collect();
        let mut arrivals = vec![vec![0.0; k]; params.horizon];
        for b in busy {
            let p = ctx.partitions.partition_of(b.node).index();
            let first = (((b.free_at - clock) / dt).ceil().max(0.0) as usize).max(1);
            for row in arrivals.iter_mut().skip(first - 1) {
                row[p] += 1.0;
            }
        }
        Self {
            vehicles,
            candidates,
            origin_density: ctx.origin_density.to_vec(),
            departure_rates: ctx.request_rates.iter().map(|r| r * dt).collect(),
            arrivals,
            gamma: params.gamma,
            horizon: params.horizon,
            w_c: params.w_c,
        }
    }

    pub fn partitions(&self) -> usize {
        self.origin_density.len()
    }

    pub fn validate(&self) -> Result<(), RebalanceError> {
        let k = self.partitions();
        if self.candidates.len() != self.vehicles.len() || self.candidates.iter().any(|c| c.is_empty()) {
            return Err(RebalanceError::Invalid("every vehicle needs at least one candidate".into()));
        }
        if self.departure_rates.len() != k || self.arrivals.len() != self.horizon || self.arrivals.iter().any(|a| a.len() != k) {
            return Err(RebalanceError::Invalid("partition counts disagree".into()));
        }
        if self.candidates.iter().flatten().any(|c| c.partition.index() >= k || c.cost < 0.0) {
            return Err(RebalanceError::Invalid("bad candidate".into()));
        }
        if (self.origin_density.iter().sum::<f64>() - 1.0).abs() > 1e-9 || self.origin_density.iter().any(|o| *o < 0.0) {
            return Err(RebalanceError::Invalid("origin density must sum to 1".into()));
        }
        if !(0.0..=1.0).contains(&self.w_c) || self.gamma <= 0.0 || self.gamma > 1.0 {
            return Err(RebalanceError::Invalid("w_c must be in [0,1] and gamma in (0,1]".into()));
        }
        Ok(())
    }

    /// Partition vehicle `i` occupies at interval `tau` on candidate `j`.
    pub fn partition_at(&self, i: usize, j: usize, tau: usize) -> PartitionId {
        let c = &self.candidates[i][j];
        if tau >= c.arrival {
            c.partition
        } else {
            self.vehicles[i].home
        }
    }

    /// `N_tau` for `tau = 1..=horizon`, independent of the plan.
    pub fn normalizers(&self) -> Vec<f64> {
        let total_rate: f64 = self.departure_rates.iter().sum();
        (1..=self.horizon)
            .map(|tau| self.vehicles.len() as f64 + self.arrivals[tau - 1].iter().sum::<f64>() - tau as f64 * self.gamma * total_rate)
            .collect()
    }

    /// All-stay fractional plan.
    pub fn stay_plan(&self) -> Vec<Vec<f64>> {
        self.candidates.iter().map(|c| (0..c.len()).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect()).collect()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.candidates.len() + 1);
        off.push(0);
        for c in &self.candidates {
            off.push(off.last().unwrap() + c.len());
        }
        off
    }

    /// Full objective at a fractional plan, using the raw (unclamped) counts.
    pub fn objective(&self, t: &[Vec<f64>]) -> Result<f64, RebalanceError> {
        let counts = predict_idle_counts(self, t)?;
        let mut gap = 0.0;
        for (row, n) in counts.counts.iter().zip(&counts.normalizers) {
            for (c, o) in row.iter().zip(&self.origin_density) {
                gap += (c / n - o).powi(2);
            }
        }
        let cost: f64 = t.iter().zip(&self.candidates).flat_map(|(r, c)| r.iter().zip(c).map(|(x, c)| x * c.cost)).sum();
        Ok((1.0 - self.w_c) * gap + self.w_c * cost)
    }

    /// Reported balance gap at interval `tau`, with negative counts clamped
    /// to zero.
    pub fn distance_at(&self, t: &[Vec<f64>], tau: usize) -> Result<f64, RebalanceError> {
        let counts = predict_idle_counts(self, t)?;
        let n = counts.normalizers[tau - 1];
        Ok(counts.counts[tau - 1].iter().zip(&self.origin_density).map(|(c, o)| (c.max(0.0) / n - o).powi(2)).sum())
    }

    /// The relaxation as `0.5 x'Qx + c'x` (plus a constant) over one simplex
    /// per vehicle.
    pub fn to_qp(&self) -> Result<SimplexQp, RebalanceError> {
        self.validate()?;
        let norms = self.normalizers();
        if let Some(tau) = norms.iter().position(|n| *n <= 0.0) {
            return Err(RebalanceError::ZeroNormalizer { tau: tau + 1 });
        }
        let k = self.partitions();
        let off = self.offsets();
        let n = off[self.candidates.len()];
        let rows = k * self.horizon;
        // n_k^tau / N_tau - o_k = (A t - b)_row
        let mut a = DMatrix::zeros(rows, n);
        let mut b = DVector::zeros(rows);
        for tau in 1..=self.horizon {
            for p in 0..k {
                let r = (tau - 1) * k + p;
                let base = self.arrivals[tau - 1][p] - tau as f64 * self.gamma * self.departure_rates[p];
                b[r] = self.origin_density[p] - base / norms[tau - 1];
            }
            for i in 0..self.candidates.len() {
                for j in 0..self.candidates[i].len() {
                    let r = (tau - 1) * k + self.partition_at(i, j, tau).index();
                    a[(r, off[i] + j)] += 1.0 / norms[tau - 1];
                }
            }
        }
        let w = 1.0 - self.w_c;
        let mut q = a.transpose() * &a * (2.0 * w);
        q = (&q + q.transpose()) * 0.5;
        let mut c = a.transpose() * b * (-2.0 * w);
        for i in 0..self.candidates.len() {
            for j in 0..self.candidates[i].len() {
                c[off[i] + j] += self.w_c * self.candidates[i][j].cost;
            }
        }
        let blocks = (0..self.candidates.len()).map(|i| (off[i]..off[i + 1]).collect()).collect();
        Ok(SimplexQp::new(q, c, blocks, vec![1.0; self.candidates.len()])?)
    }
}

/// Expected idle counts per partition and interval for a fractional plan.
pub fn predict_idle_counts(problem: &RebalanceProblem, t: &[Vec<f64>]) -> Result<IdleCounts, RebalanceError> {
    let k = problem.partitions();
    let normalizers = problem.normalizers();
    if let Some(tau) = normalizers.iter().position(|n| *n <= 0.0) {
        return Err(RebalanceError::ZeroNormalizer { tau: tau + 1 });
    }
    let counts = (1..=problem.horizon)
        .map(|tau| {
            let mut row: Vec<f64> =
                (0..k).map(|p| problem.arrivals[tau - 1][p] - tau as f64 * problem.gamma * problem.departure_rates[p]).collect();
            for (i, ti) in t.iter().enumerate() {
                for (j, x) in ti.iter().enumerate() {
                    row[problem.partition_at(i, j, tau).index()] += x;
                }
            }
            row
        })
        .collect();
    Ok(IdleCounts { counts, normalizers })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    /// Row-stochastic, one row per vehicle.
    pub t: Vec<Vec<f64>>,
    pub objective: f64,
    pub kkt_residual: f64,
}

/// Solves the continuous relaxation, starting from the all-stay plan.
pub fn solve_relaxed(problem: &RebalanceProblem) -> Result<RelaxedSolution, RebalanceError> {
    let qp = problem.to_qp()?;
    let start = DVector::from_iterator(qp.dim(), problem.stay_plan().into_iter().flatten());
    let sol = qp.solve(Some(&start))?;
    let off = problem.offsets();
    let t: Vec<Vec<f64>> = (0..problem.candidates.len()).map(|i| sol.x.as_slice()[off[i]..off[i + 1]].to_vec()).collect();
    let objective = problem.objective(&t)?;
    Ok(RelaxedSolution { t, objective, kkt_residual: sol.kkt_residual })
}

/// One relocation decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relocation {
    pub vehicle: VehicleId,
    pub choice: usize,
    pub candidate: Candidate,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RebalancePlan {
    /// Exactly one entry per idle vehicle, in problem order.
    pub trips: Vec<Relocation>,
}

impl RebalancePlan {
    pub fn choices(&self) -> Vec<usize> {
        self.trips.iter().map(|r| r.choice).collect()
    }

    /// Vehicles that actually move, with their destination.
    pub fn moves(&self) -> impl Iterator<Item = (VehicleId, NodeId)> + '_ {
        self.trips.iter().filter_map(|r| r.candidate.target.map(|n| (r.vehicle, n)))
    }

    /// The plan as a 0/1 matrix.
    pub fn indicator(&self, problem: &RebalanceProblem) -> Vec<Vec<f64>> {
        self.trips
            .iter()
            .zip(&problem.candidates)
            .map(|(r, c)| (0..c.len()).map(|j| if j == r.choice { 1.0 } else { 0.0 }).collect())
            .collect()
    }
}

/// Samples one candidate per vehicle from its row of `t`.
pub fn round_plan(problem: &RebalanceProblem, t: &[Vec<f64>], seed: u64) -> RebalancePlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trips = t
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let weights: Vec<f64> = row.iter().map(|x| x.max(0.0)).collect();
            let choice = match WeightedIndex::new(&weights) {
                Ok(d) => d.sample(&mut rng),
                Err(_) => 0,
            };
            Relocation { vehicle: problem.vehicles[i].id, choice, candidate: problem.candidates[i][choice] }
        })
        .collect();
    RebalancePlan { trips }
}

/// Predicted idle fleet below which balance shares are not planned for.
pub const MIN_IDLE_FLEET: f64 = 1.0;

/// Plans relocations for `problem`. When the predicted idle fleet drops below
/// [`MIN_IDLE_FLEET`] within the horizon, the horizon is shortened to the
/// leading intervals above it; if none remain every vehicle stays.
pub fn plan_rebalance(problem: &RebalanceProblem, seed: u64) -> Result<RebalancePlan, RebalanceError> {
    if problem.vehicles.is_empty() {
        return Ok(RebalancePlan::default());
    }
    let usable = problem.normalizers().iter().take_while(|n| **n >= MIN_IDLE_FLEET).count();
    if usable == 0 {
        return Ok(round_plan(problem, &problem.stay_plan(), seed));
    }
    let owned;
    let problem = if usable < problem.horizon {
        let mut p = problem.clone();
        p.horizon = usable;
        p.arrivals.truncate(usable);
        owned = p;
        &owned
    } else {
        problem
    };
    let relaxed = solve_relaxed(problem)?;
    Ok(round_plan(problem, &relaxed.t, seed))
}

/// Mixes the run seed with the interval index.
pub fn rounding_seed(seed: u64, interval: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ interval.wrapping_add(0x632b_e59b_d9b4_e019).rotate_left(17)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::min_eigenvalue;
    use rand::Rng;

    fn p(i: u32) -> PartitionId {
        PartitionId(i)
    }

    fn mv(to: u32, cost: f64, arrival: usize) -> Candidate {
        Candidate { target: Some(NodeId(to)), partition: p(to), cost, arrival }
    }

    fn vehicle(i: u32, home: u32) -> IdleVehicle {
        IdleVehicle { id: VehicleId(i), node: NodeId(home), home: p(home) }
    }

    fn problem(vehicles: Vec<IdleVehicle>, candidates: Vec<Vec<Candidate>>, o: Vec<f64>, horizon: usize, w_c: f64) -> RebalanceProblem {
        let k = o.len();
        RebalanceProblem {
            vehicles,
            candidates,
            departure_rates: vec![0.0; k],
            arrivals: vec![vec![0.0; k]; horizon],
            origin_density: o,
            gamma: 0.8,
            horizon,
            w_c,
        }
    }

    /// Random instance with every partition reachable from every home.
    fn random_problem(rng: &mut ChaCha8Rng, nv: usize, k: usize, w_c: f64) -> RebalanceProblem {
        let horizon = rng.random_range(1..=4);
        let vehicles: Vec<IdleVehicle> = (0..nv).map(|i| vehicle(i as u32, rng.random_range(0..k as u32))).collect();
        let candidates = vehicles
            .iter()
            .map(|v| {
                let mut c = vec![Candidate::stay(v.home)];
                for q in 0..k as u32 {
                    if q != v.home.0 && rng.random_bool(0.7) {
                        c.push(mv(q, rng.random_range(0.0..0.2), rng.random_range(1..=horizon)));
                    }
                }
                c
            })
            .collect();
        let mut o: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = o.iter().sum();
        o.iter_mut().for_each(|x| *x /= s);
        let mut pr = problem(vehicles, candidates, o, horizon, w_c);
        pr.departure_rates = (0..k).map(|_| rng.random_range(0.0..0.3)).collect();
        for tau in 0..horizon {
            for q in 0..k {
                pr.arrivals[tau][q] = if tau == 0 { rng.random_range(0..2) as f64 } else { pr.arrivals[tau - 1][q] + rng.random_range(0..2) as f64 };
            }
        }
        pr
    }

    fn random_rows(rng: &mut ChaCha8Rng, pr: &RebalanceProblem) -> Vec<Vec<f64>> {
        pr.candidates
            .iter()
            .map(|c| {
                let w: Vec<f64> = c.iter().map(|_| rng.random_range(0.0..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|x| x / s).collect()
            })
            .collect()
    }

    #[test]
    fn single_idle_vehicle_counts() {
        let pr = problem(vec![vehicle(0, 0)], vec![vec![Candidate::stay(p(0))]], vec![0.5, 0.5], 1, 0.5);
        let c = predict_idle_counts(&pr, &pr.stay_plan()).unwrap();
        assert_eq!(c.counts, vec![vec![1.0, 0.0]]);
        assert_eq!(c.normalizers, vec![1.0]);
    }

    #[test]
    fn depleted_fleet_has_no_normalizer() {
        let mut pr = problem(vec![vehicle(0, 0)], vec![vec![Candidate::stay(p(0))]], vec![0.5, 0.5], 1, 0.5);
        pr.arrivals = vec![vec![1.0, 0.0]];
        // tau * gamma * sum(lambda) = 2 = idle + arrivals
        pr.departure_rates = vec![1.25, 1.25];
        assert_eq!(predict_idle_counts(&pr, &pr.stay_plan()), Err(RebalanceError::ZeroNormalizer { tau: 1 }));
        assert_eq!(solve_relaxed(&pr).unwrap_err(), RebalanceError::ZeroNormalizer { tau: 1 });
        // The planner falls back to staying.
        assert_eq!(plan_rebalance(&pr, 1).unwrap().choices(), vec![0]);
    }

    #[test]
    fn counts_match_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let (nv, k, w_c) = (rng.random_range(1..6), rng.random_range(2..5), 0.3);
            let pr = random_problem(&mut rng, nv, k, w_c);
            let t = random_rows(&mut rng, &pr);
            let Ok(c) = predict_idle_counts(&pr, &t) else { continue };
            for tau in 1..=pr.horizon {
                let big_n = pr.vehicles.len() as f64 + pr.arrivals[tau - 1].iter().sum::<f64>()
                    - tau as f64 * pr.gamma * pr.departure_rates.iter().sum::<f64>();
                assert!((c.normalizers[tau - 1] - big_n).abs() < 1e-12);
                for k in 0..pr.partitions() {
                    let mut n = pr.arrivals[tau - 1][k] - tau as f64 * pr.gamma * pr.departure_rates[k];
                    for i in 0..pr.vehicles.len() {
                        for (j, cand) in pr.candidates[i].iter().enumerate() {
                            let here = if tau < cand.arrival { pr.vehicles[i].home } else { cand.partition };
                            if here.index() == k {
                                n += t[i][j];
                            }
                        }
                    }
                    assert!((c.counts[tau - 1][k] - n).abs() < 1e-12);
                }
            }
            // Counts of the idle fleet add up to the normalizer.
            for (row, n) in c.counts.iter().zip(&c.normalizers) {
                assert!((row.iter().sum::<f64>() - n).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn qp_reproduces_objective_and_is_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for _ in 0..100 {
            let (nv, k, w_c) = (rng.random_range(1..6), rng.random_range(2..5), rng.random_range(0.0..1.0));
            let pr = random_problem(&mut rng, nv, k, w_c);
            let Ok(qp) = pr.to_qp() else { continue };
            checked += 1;
            assert!(min_eigenvalue(&qp.q) >= -1e-10);
            let t0 = pr.stay_plan();
            let x0 = DVector::from_iterator(qp.dim(), t0.iter().flatten().copied());
            let shift = pr.objective(&t0).unwrap() - qp.objective(&x0);
            for _ in 0..5 {
                let t = random_rows(&mut rng, &pr);
                let x = DVector::from_iterator(qp.dim(), t.iter().flatten().copied());
                assert!((qp.objective(&x) + shift - pr.objective(&t).unwrap()).abs() < 1e-10);
                // Analytic gradient against central differences of the direct objective.
                let g = qp.gradient(&x);
                let flat: Vec<f64> = t.iter().flatten().copied().collect();
                for v in 0..flat.len() {
                    let h = 1e-6;
                    let eval = |d: f64| {
                        let mut f = flat.clone();
                        f[v] += d;
                        let mut rows = Vec::new();
                        let mut it = f.into_iter();
                        for c in &pr.candidates {
                            rows.push(it.by_ref().take(c.len()).collect::<Vec<_>>());
                        }
                        pr.objective(&rows).unwrap()
                    };
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    assert!((fd - g[v]).abs() <= 1e-5 * (1.0 + g[v].abs()), "{fd} vs {}", g[v]);
                }
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn pure_cost_picks_cheapest() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let pr = random_problem(&mut rng, 4, 3, 1.0);
            let Ok(sol) = solve_relaxed(&pr) else { continue };
            assert!(sol.kkt_residual <= 1e-6);
            for (row, c) in sol.t.iter().zip(&pr.candidates) {
                // Stay costs 0, so all mass sits on zero-cost options.
                let mass: f64 = row.iter().zip(c).filter(|(_, c)| c.cost == 0.0).map(|(x, _)| x).sum();
                assert!((mass - 1.0).abs() < 1e-6);
            }
        }
    }

    fn grid_min_two(pr: &RebalanceProblem) -> f64 {
        // Each vehicle has two candidates; parametrize by the move fraction.
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let n = 400;
        for a in 0..=n {
            for b in 0..=n {
                let (x, y) = (a as f64 / n as f64, b as f64 / n as f64);
                let f = pr.objective(&[vec![1.0 - x, x], vec![1.0 - y, y]]).unwrap();
                if f < best.0 {
                    best = (f, x, y);
                }
            }
        }
        let (mut f, x0, y0) = best;
        let h = 1.0 / n as f64;
        for a in -50..=50 {
            for b in -50..=50 {
                let x = (x0 + a as f64 * h / 50.0).clamp(0.0, 1.0);
                let y = (y0 + b as f64 * h / 50.0).clamp(0.0, 1.0);
                f = f.min(pr.objective(&[vec![1.0 - x, x], vec![1.0 - y, y]]).unwrap());
            }
        }
        f
    }

    #[test]
    fn single_vehicle_moves_toward_demand() {
        let pr = problem(vec![vehicle(0, 1)], vec![vec![Candidate::stay(p(1)), mv(0, 0.0, 1)]], vec![1.0, 0.0], 2, 0.0);
        let sol = solve_relaxed(&pr).unwrap();
        let best = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .min_by(|a, b| pr.objective(&[vec![1.0 - a, *a]]).unwrap().total_cmp(&pr.objective(&[vec![1.0 - b, *b]]).unwrap()))
            .unwrap();
        assert_eq!(best, 1.0);
        assert!((sol.t[0][1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_vehicle_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for case in 0..12 {
            let w_c = rng.random_range(0.0..0.9);
            let cost = rng.random_range(0.0..0.3);
            let arrival = rng.random_range(1..=2);
            let o = rng.random_range(0.2..0.8);
            let pr = if case % 2 == 0 {
                // Symmetric: both vehicles in partition 1, same option to move to 0.
                problem(
                    vec![vehicle(0, 1), vehicle(1, 1)],
                    vec![vec![Candidate::stay(p(1)), mv(0, cost, arrival)], vec![Candidate::stay(p(1)), mv(0, cost, arrival)]],
                    vec![o, 1.0 - o],
                    2,
                    w_c,
                )
            } else {
                problem(
                    vec![vehicle(0, 0), vehicle(1, 1)],
                    vec![vec![Candidate::stay(p(0)), mv(2, cost, arrival)], vec![Candidate::stay(p(1)), mv(0, 2.0 * cost, 1)]],
                    vec![0.2, 0.3, 0.5],
                    3,
                    w_c,
                )
            };
            let sol = solve_relaxed(&pr).unwrap();
            assert!(sol.kkt_residual <= 1e-6);
            let oracle = grid_min_two(&pr);
            assert!(sol.objective <= oracle + 1e-9, "{} > {}", sol.objective, oracle);
            assert!(oracle - sol.objective < 1e-4);
        }
    }

    #[test]
    fn relaxation_bounds_every_integer_plan() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..60 {
            let (nv, k, w_c) = (rng.random_range(1..=3), rng.random_range(2..5), rng.random_range(0.0..1.0));
            let pr = random_problem(&mut rng, nv, k, w_c);
            let Ok(sol) = solve_relaxed(&pr) else { continue };
            assert!(sol.kkt_residual <= 1e-6);
            let sizes: Vec<usize> = pr.candidates.iter().map(|c| c.len()).collect();
            let total: usize = sizes.iter().product();
            for mut code in 0..total {
                let t: Vec<Vec<f64>> = sizes
                    .iter()
                    .map(|&s| {
                        let j = code % s;
                        code /= s;
                        (0..s).map(|x| if x == j { 1.0 } else { 0.0 }).collect()
                    })
                    .collect();
                assert!(sol.objective <= pr.objective(&t).unwrap() + 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_row_always_stays() {
        let pr = problem(vec![vehicle(0, 0)], vec![vec![Candidate::stay(p(0)), mv(1, 0.1, 1)]], vec![0.5, 0.5], 1, 0.5);
        for seed in 0..200 {
            assert_eq!(round_plan(&pr, &[vec![1.0, 0.0]], seed).choices(), vec![0]);
        }
    }

    #[test]
    fn rounding_frequencies_are_binomial() {
        let pr = problem(vec![vehicle(0, 0)], vec![vec![Candidate::stay(p(0)), mv(1, 0.1, 1)]], vec![0.5, 0.5], 1, 0.5);
        let draws = 10_000;
        let moved = (0..draws).filter(|&s| round_plan(&pr, &[vec![0.5, 0.5]], s).choices()[0] == 1).count() as f64;
        let sigma = (draws as f64 * 0.25).sqrt();
        assert!((moved - 5000.0).abs() <= 3.0 * sigma, "{moved}");
    }

    #[test]
    fn rounding_is_deterministic_and_one_trip_per_vehicle() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let pr = random_problem(&mut rng, 6, 4, 0.5);
        let t = random_rows(&mut rng, &pr);
        for seed in 0..100 {
            let a = round_plan(&pr, &t, seed);
            assert_eq!(a, round_plan(&pr, &t, seed));
            assert_eq!(a.trips.len(), pr.vehicles.len());
            for (row, r) in a.indicator(&pr).iter().zip(&a.trips) {
                assert_eq!(row.iter().sum::<f64>(), 1.0);
                assert_eq!(pr.vehicles.iter().filter(|v| v.id == r.vehicle).count(), 1);
            }
        }
    }

    #[test]
    fn empty_fleet_gives_empty_plan() {
        let pr = problem(vec![], vec![], vec![1.0], 2, 0.5);
        assert!(plan_rebalance(&pr, 0).unwrap().trips.is_empty());
    }

    #[test]
    fn balanced_fleet_stays() {
        // Two vehicles in each of two partitions, demand split evenly.
        let vs = vec![vehicle(0, 0), vehicle(1, 0), vehicle(2, 1), vehicle(3, 1)];
        let cands = vs.iter().map(|v| vec![Candidate::stay(v.home), mv(1 - v.home.0, 0.05, 1)]).collect();
        let pr = problem(vs, cands, vec![0.5, 0.5], 3, 0.3);
        let sol = solve_relaxed(&pr).unwrap();
        for row in &sol.t {
            assert!((row[0] - 1.0).abs() < 1e-6);
        }
        // Staying beats each single move by at least that move's weighted cost.
        let stay = pr.objective(&pr.stay_plan()).unwrap();
        for i in 0..4 {
            let mut t = pr.stay_plan();
            t[i] = vec![0.0, 1.0];
            assert!(pr.objective(&t).unwrap() - stay >= pr.w_c * 0.05 - 1e-12);
        }
        for seed in 0..20 {
            assert_eq!(plan_rebalance(&pr, seed).unwrap().choices(), vec![0; 4]);
        }
    }

    #[test]
    fn imbalanced_fleet_gets_closer_to_demand() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..40 {
            let k = 4;
            // All idle vehicles start in partitions 0 and 1; demand is everywhere.
            let nv = rng.random_range(3..9);
            let vs: Vec<IdleVehicle> = (0..nv).map(|i| vehicle(i, rng.random_range(0..2))).collect();
            let cands = vs
                .iter()
                .map(|v| {
                    let mut c = vec![Candidate::stay(v.home)];
                    for q in 0..k as u32 {
                        if q != v.home.0 {
                            c.push(mv(q, rng.random_range(0.0..0.1), rng.random_range(1..=3)));
                        }
                    }
                    c
                })
                .collect();
            let pr = problem(vs, cands, vec![0.1, 0.2, 0.3, 0.4], 4, 0.0);
            let sol = solve_relaxed(&pr).unwrap();
            assert!(sol.kkt_residual <= 1e-6);
            let before = pr.distance_at(&pr.stay_plan(), pr.horizon).unwrap();
            let after = pr.distance_at(&sol.t, pr.horizon).unwrap();
            assert!(after < before, "{after} >= {before}");
        }
    }
}
