//! Convex QP over a product of scaled simplices.
//!
//! `min 0.5 x'Qx + c'x` subject to `sum(x[block]) = target` for every block and
//! `x >= 0`, where the blocks partition the variables. Solved by projected
//! gradient with Armijo backtracking; once the support stops changing, a
//! Newton step on the support's affine hull finishes the job exactly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::OptimError;

pub const MAX_ITERATIONS: usize = 100_000;
const KKT_TOL: f64 = 1e-10;
const ACCEPT_TOL: f64 = 1e-6;
/// Iterations without progress before giving up on `KKT_TOL`.
const MAX_STALLED: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexQp {
    /// Symmetric positive semidefinite `n x n`.
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    /// Variable indices of each block; every variable in exactly one block.
    pub blocks: Vec<Vec<usize>>,
    /// Required sum of each block.
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// `max |x - P(x - grad)|`, zero exactly at a KKT point.
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Objective after each accepted step.
    pub trace: Vec<f64>,
}

/// Euclidean projection of `v` onto `{x >= 0, sum(x) = s}` (sort-based).
pub fn project_simplex(v: &[f64], s: f64) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    if s <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - s) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(q: &DMatrix<f64>) -> f64 {
    if q.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(q.clone()).eigenvalues.min()
}

impl SimplexQp {
    pub fn new(q: DMatrix<f64>, c: DVector<f64>, blocks: Vec<Vec<usize>>, targets: Vec<f64>) -> Result<Self, OptimError> {
        let p = Self { q, c, blocks, targets };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.c
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for (block, &s) in self.blocks.iter().zip(&self.targets) {
            let vals: Vec<f64> = block.iter().map(|&i| v[i]).collect();
            for (&i, p) in block.iter().zip(project_simplex(&vals, s)) {
                out[i] = p;
            }
        }
        out
    }

    pub fn kkt_residual(&self, x: &DVector<f64>) -> f64 {
        let g = self.gradient(x);
        (x - self.project(&(x - g))).amax()
    }

    fn validate(&self) -> Result<(), OptimError> {
        let n = self.c.len();
        if self.q.nrows() != n || self.q.ncols() != n || self.blocks.len() != self.targets.len() {
            return Err(OptimError::Dimension("Q, c and blocks disagree".into()));
        }
        let mut seen = vec![false; n];
        for b in &self.blocks {
            for &i in b {
                if i >= n || seen[i] {
                    return Err(OptimError::Dimension(format!("variable {i} missing or in two blocks")));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(OptimError::Dimension("every variable must belong to a block".into()));
        }
        for (b, &s) in self.blocks.iter().zip(&self.targets) {
            if !s.is_finite() || s < 0.0 || (b.is_empty() && s != 0.0) {
                return Err(OptimError::InfeasibleProgram);
            }
        }
        let scale = self.q.amax().max(1.0);
        if (&self.q - self.q.transpose()).amax() > 1e-8 * scale {
            return Err(OptimError::NotConvex("Q is not symmetric".into()));
        }
        let lambda = min_eigenvalue(&self.q);
        if lambda < -1e-8 * scale {
            return Err(OptimError::NotConvex(format!("Q has eigenvalue {lambda}")));
        }
        Ok(())
    }

    /// Minimizes over the affine hull of the current support, then moves from
    /// `x` toward that minimizer as far as non-negativity allows. A variable
    /// that blocks the move leaves the support and the step is repeated.
    fn polish(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let mut y = x.clone();
        let mut moved = false;
        for _ in 0..=self.dim() {
            match self.subspace_step(&y) {
                Some((next, blocked)) => {
                    y = next;
                    moved = true;
                    if !blocked {
                        break;
                    }
                }
                None => break,
            }
        }
        moved.then_some(y)
    }

    /// One Newton step on the support's affine hull; reports whether a bound
    /// cut it short.
    fn subspace_step(&self, x: &DVector<f64>) -> Option<(DVector<f64>, bool)> {
        let support: Vec<Vec<usize>> =
            self.blocks.iter().map(|b| b.iter().copied().filter(|&i| x[i] > 0.0).collect()).collect();
        // Null-space basis of the block-sum constraints restricted to the support.
        let dirs: Vec<(usize, usize)> =
            support.iter().flat_map(|s| s.iter().skip(1).map(move |&i| (s[0], i))).collect();
        if dirs.is_empty() {
            return None;
        }
        let k = dirs.len();
        let n = self.dim();
        let mut basis = DMatrix::zeros(n, k);
        for (col, &(anchor, i)) in dirs.iter().enumerate() {
            basis[(i, col)] = 1.0;
            basis[(anchor, col)] = -1.0;
        }
        let h = basis.transpose() * &self.q * &basis;
        let g = basis.transpose() * self.gradient(x);
        let eig = SymmetricEigen::new(h);
        let cutoff = 1e-12 * eig.eigenvalues.amax().max(1e-300);
        let mut z = DVector::zeros(k);
        for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > cutoff {
                let v = eig.eigenvectors.column(j);
                z -= v * (v.dot(&g) / lambda);
            }
        }
        let step = &basis * z;
        let mut alpha: f64 = 1.0;
        for i in 0..n {
            if step[i] < 0.0 {
                alpha = alpha.min(-x[i] / step[i]);
            }
        }
        let blocked = alpha < 1.0;
        let mut y = x + step * alpha;
        for (s, &t) in support.iter().zip(&self.targets) {
            // Snap tiny negatives and restore exact block sums.
            for &i in s {
                if y[i] < 1e-15 * t.max(1.0) {
                    y[i] = 0.0;
                }
            }
            let sum: f64 = s.iter().map(|&i| y[i]).sum();
            if sum > 0.0 {
                for &i in s {
                    y[i] *= t / sum;
                }
            }
        }
        if blocked && y == *x {
            return None;
        }
        Some((y, blocked))
    }

    /// Solves from the projection of `start` (uniform split when `None`).
    pub fn solve(&self, start: Option<&DVector<f64>>) -> Result<QpSolution, OptimError> {
        let n = self.dim();
        let mut x = match start {
            Some(s) => self.project(s),
            None => {
                let mut x = DVector::zeros(n);
                for (b, &s) in self.blocks.iter().zip(&self.targets) {
                    for &i in b {
                        x[i] = s / b.len() as f64;
                    }
                }
                x
            }
        };
        // Gershgorin bound on the largest eigenvalue.
        let lipschitz = (0..n).map(|i| self.q.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max).max(1e-12);
        let mut f = self.objective(&x);
        let mut trace = vec![f];
        let mut step = 1.0 / lipschitz;
        let mut prev_support: Vec<bool> = Vec::new();
        let mut residual = self.kkt_residual(&x);
        let mut iterations = 0;
        let mut stalled = 0;
        while iterations < MAX_ITERATIONS && residual > KKT_TOL && stalled < MAX_STALLED {
            iterations += 1;
            let g = self.gradient(&x);
            let mut progress = false;
            // Changes in f are computed as g'd + d'Qd/2, which stays accurate
            // when f itself is large.
            let mut t = step;
            let (y, change) = loop {
                let y = self.project(&(&x - &g * t));
                let d = &y - &x;
                let curvature = d.dot(&(&self.q * &d));
                if t * curvature <= d.norm_squared() * (1.0 + 1e-12) || t < 1e-20 {
                    break (y, g.dot(&d) + 0.5 * curvature);
                }
                t *= 0.5;
            };
            step = (t * 2.0).min(1e3 / lipschitz);
            if change < 0.0 {
                x = y;
                f += change;
                trace.push(f);
                progress = true;
            }
            let support: Vec<bool> = x.iter().map(|v| *v > 0.0).collect();
            if support == prev_support {
                if let Some(p) = self.polish(&x) {
                    let d = &p - &x;
                    let change = self.gradient(&x).dot(&d) + 0.5 * d.dot(&(&self.q * &d));
                    if change <= 0.0 {
                        x = p;
                        f += change;
                        trace.push(f);
                        progress |= change < 0.0;
                    }
                }
            }
            prev_support = support;
            let r = self.kkt_residual(&x);
            stalled = if progress || r < residual { 0 } else { stalled + 1 };
            residual = r;
        }
        let f = self.objective(&x);
        if residual > ACCEPT_TOL {
            return Err(OptimError::NonConvergence { iterations, residual });
        }
        Ok(QpSolution { objective: f, x, kkt_residual: residual, iterations, trace })
    }
}
