//! Best-first branch-and-bound for 0-1 programs with LP-relaxation bounds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::lp::{solve_lp, LinearProgram, LpOutcome};
use super::OptimError;

/// Sparse linear constraint `sum(coef * x[index]) (<= | =) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coefs, rhs }
    }

    fn activity(&self, x: &[bool]) -> f64 {
        self.coefs.iter().filter(|(j, _)| x[*j]).map(|(_, a)| a).sum()
    }
}

/// `min costs'x` over `x in {0,1}^n` subject to `le` and `eq` rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZeroOneProgram {
    pub costs: Vec<f64>,
    pub le: Vec<Constraint>,
    pub eq: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlpSolution {
    pub x: Vec<bool>,
    pub objective: f64,
    /// Branch-and-bound nodes whose relaxation was solved.
    pub nodes: usize,
}

impl ZeroOneProgram {
    pub fn objective(&self, x: &[bool]) -> f64 {
        self.costs.iter().zip(x).filter(|(_, &x)| x).map(|(c, _)| c).sum()
    }

    pub fn is_feasible(&self, x: &[bool]) -> bool {
        let tol = |rhs: f64| 1e-9 * (1.0 + rhs.abs());
        self.le.iter().all(|c| c.activity(x) <= c.rhs + tol(c.rhs))
            && self.eq.iter().all(|c| (c.activity(x) - c.rhs).abs() <= tol(c.rhs))
    }

    fn validate(&self) -> Result<(), OptimError> {
        let n = self.costs.len();
        for c in self.le.iter().chain(&self.eq) {
            if c.coefs.iter().any(|(j, _)| *j >= n) {
                return Err(OptimError::Dimension(format!("constraint references variable >= {n}")));
            }
        }
        Ok(())
    }

    /// Variables whose `<= 1` bound follows from a row with non-negative
    /// coefficients and `rhs / coef <= 1`.
    fn implied_upper_bounds(&self) -> Vec<bool> {
        let mut implied = vec![false; self.costs.len()];
        for c in self.le.iter().chain(&self.eq) {
            if c.coefs.iter().any(|(_, a)| *a < 0.0) {
                continue;
            }
            for &(j, a) in &c.coefs {
                if a > 0.0 && c.rhs / a <= 1.0 + 1e-12 {
                    implied[j] = true;
                }
            }
        }
        implied
    }
}

struct Node {
    bound: f64,
    seq: usize,
    fixed: Vec<Option<bool>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap: smaller bound first, then older node first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

enum Relaxation {
    Infeasible,
    Solved { x: Vec<f64>, bound: f64 },
}

fn relax(p: &ZeroOneProgram, fixed: &[Option<bool>], needs_ub: &[bool]) -> Result<Relaxation, OptimError> {
    let n = p.costs.len();
    let free: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let mut col = vec![usize::MAX; n];
    for (k, &j) in free.iter().enumerate() {
        col[j] = k;
    }
    let base: f64 = (0..n).filter(|&j| fixed[j] == Some(true)).map(|j| p.costs[j]).sum();
    let project = |c: &Constraint| -> (Vec<f64>, f64) {
        let mut row = vec![0.0; free.len()];
        let mut rhs = c.rhs;
        for &(j, a) in &c.coefs {
            match fixed[j] {
                None => row[col[j]] += a,
                Some(true) => rhs -= a,
                Some(false) => {}
            }
        }
        (row, rhs)
    };
    let mut lp = LinearProgram { costs: free.iter().map(|&j| p.costs[j]).collect(), le: Vec::new(), eq: Vec::new() };
    for c in &p.le {
        let (row, rhs) = project(c);
        if row.iter().all(|a| *a == 0.0) {
            if rhs < -1e-9 * (1.0 + c.rhs.abs()) {
                return Ok(Relaxation::Infeasible);
            }
            continue;
        }
        lp.le.push((row, rhs));
    }
    for c in &p.eq {
        let (row, rhs) = project(c);
        if row.iter().all(|a| *a == 0.0) {
            if rhs.abs() > 1e-9 * (1.0 + c.rhs.abs()) {
                return Ok(Relaxation::Infeasible);
            }
            continue;
        }
        lp.eq.push((row, rhs));
    }
    for (k, &j) in free.iter().enumerate() {
        if needs_ub[j] {
            let mut row = vec![0.0; free.len()];
            row[k] = 1.0;
            lp.le.push((row, 1.0));
        }
    }
    match solve_lp(&lp)? {
        LpOutcome::Infeasible => Ok(Relaxation::Infeasible),
        LpOutcome::Unbounded => Err(OptimError::Dimension("relaxation unbounded despite unit bounds".into())),
        LpOutcome::Optimal { x: xf, objective } => {
            let mut x = vec![0.0; n];
            for j in 0..n {
                x[j] = match fixed[j] {
                    Some(true) => 1.0,
                    Some(false) => 0.0,
                    None => xf[col[j]],
                };
            }
            Ok(Relaxation::Solved { x, bound: base + objective })
        }
    }
}

const INTEGRALITY_TOL: f64 = 1e-7;

/// Globally optimal 0-1 solution by best-first branch-and-bound.
///
/// Bounds come from the LP relaxation; the branching variable is the most
/// fractional one (ties to the lowest index) and the `x = 1` child is explored
/// before `x = 0` at equal bounds.
pub fn solve_01_ilp(p: &ZeroOneProgram) -> Result<IlpSolution, OptimError> {
    p.validate()?;
    let n = p.costs.len();
    let needs_ub: Vec<bool> = p.implied_upper_bounds().iter().map(|b| !b).collect();
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    let mut nodes = 0;
    let mut incumbent: Option<(Vec<bool>, f64)> = None;
    heap.push(Node { bound: f64::NEG_INFINITY, seq, fixed: vec![None; n] });

    while let Some(node) = heap.pop() {
        if let Some((_, best)) = &incumbent {
            if node.bound >= best - 1e-9 * (1.0 + best.abs()) {
                break;
            }
        }
        nodes += 1;
        let Relaxation::Solved { x, bound } = relax(p, &node.fixed, &needs_ub)? else { continue };
        if let Some((_, best)) = &incumbent {
            if bound >= best - 1e-9 * (1.0 + best.abs()) {
                continue;
            }
        }
        let mut branch: Option<(usize, f64)> = None;
        for (j, &v) in x.iter().enumerate() {
            let frac = (v - v.round()).abs();
            if frac > INTEGRALITY_TOL && branch.is_none_or(|(_, f)| frac > f + 1e-12) {
                branch = Some((j, frac));
            }
        }
        match branch {
            None => {
                let xb: Vec<bool> = x.iter().map(|v| *v > 0.5).collect();
                if p.is_feasible(&xb) {
                    let obj = p.objective(&xb);
                    if incumbent.as_ref().is_none_or(|(_, best)| obj < *best) {
                        incumbent = Some((xb, obj));
                    }
                }
            }
            Some((j, _)) => {
                for value in [true, false] {
                    let mut fixed = node.fixed.clone();
                    fixed[j] = Some(value);
                    seq += 1;
                    heap.push(Node { bound, seq, fixed });
                }
            }
        }
    }
    let (x, objective) = incumbent.ok_or(OptimError::InfeasibleProgram)?;
    Ok(IlpSolution { x, objective, nodes })
}
