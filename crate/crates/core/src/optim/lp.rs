//! Dense two-phase tableau simplex for small LPs.
//!
//! Solves `min c'x` subject to `le` rows (`a'x <= b`), `eq` rows (`a'x = b`)
//! and `x >= 0`. Sized for branch-and-bound relaxations with a few hundred
//! rows and a few thousand columns.

use super::OptimError;

const EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub costs: Vec<f64>,
    pub le: Vec<(Vec<f64>, f64)>,
    pub eq: Vec<(Vec<f64>, f64)>,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `rows x (cols + 1)`; the last column is the right-hand side.
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.t[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize, obj: &mut [f64]) {
        let w = self.cols + 1;
        let p = self.t[pr * w + pc];
        for v in &mut self.t[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        eliminate(obj);
        self.basis[pr] = pc;
    }

    /// Minimizes the objective row `obj` (reduced costs, last entry is minus
    /// the objective value). Columns with `allowed[c] == false` never enter.
    fn optimize(&mut self, obj: &mut [f64], allowed: &[bool]) -> Result<bool, OptimError> {
        let mut degenerate = 0usize;
        for _ in 0..MAX_PIVOTS {
            let bland = degenerate >= DEGENERATE_LIMIT;
            let mut enter = None;
            let mut best = -EPS;
            for c in 0..self.cols {
                if allowed[c] && obj[c] < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = obj[c];
                }
            }
            let Some(pc) = enter else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > EPS {
                    let ratio = self.rhs(r) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - EPS || (ratio <= lratio + EPS && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((pr, ratio)) = leave else { return Ok(false) };
            degenerate = if ratio <= EPS { degenerate + 1 } else { 0 };
            self.pivot(pr, pc, obj);
        }
        Err(OptimError::NonConvergence { iterations: MAX_PIVOTS, residual: f64::NAN })
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, OptimError> {
    let n = lp.costs.len();
    let m = lp.le.len() + lp.eq.len();
    if lp.le.iter().chain(&lp.eq).any(|(a, _)| a.len() != n) {
        return Err(OptimError::Dimension("constraint row length differs from cost length".into()));
    }

    // Normalize rows to non-negative right-hand sides.
    struct Row<'a> {
        a: &'a [f64],
        b: f64,
        sign: f64,
        slack: Option<f64>,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(m);
    for (a, b) in &lp.le {
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        rows.push(Row { a, b: b * sign, sign, slack: Some(sign) });
    }
    for (a, b) in &lp.eq {
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        rows.push(Row { a, b: b * sign, sign, slack: None });
    }

    // Crash basis: slacks with +1, or structural unit columns for equality rows.
    let mut nonzeros = vec![0usize; n];
    for row in &rows {
        for (j, &v) in row.a.iter().enumerate() {
            if v != 0.0 {
                nonzeros[j] += 1;
            }
        }
    }
    let slack_count = rows.iter().filter(|r| r.slack.is_some()).count();
    let mut basic_of_row: Vec<Option<usize>> = vec![None; m];
    let mut used = vec![false; n];
    let mut slack_col = vec![usize::MAX; m];
    let mut next = n;
    for (i, row) in rows.iter().enumerate() {
        if let Some(s) = row.slack {
            slack_col[i] = next;
            if s > 0.0 {
                basic_of_row[i] = Some(next);
            }
            next += 1;
        }
    }
    for (i, row) in rows.iter().enumerate() {
        if basic_of_row[i].is_some() || row.slack.is_some() {
            continue;
        }
        if let Some(j) = (0..n).find(|&j| !used[j] && nonzeros[j] == 1 && row.a[j] * row.sign > EPS) {
            used[j] = true;
            basic_of_row[i] = Some(j);
        }
    }
    let artificial_rows: Vec<usize> = (0..m).filter(|&i| basic_of_row[i].is_none()).collect();
    let cols = n + slack_count + artificial_rows.len();
    let w = cols + 1;
    let mut t = vec![0.0; m * w];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.a.iter().enumerate() {
            t[i * w + j] = v * row.sign;
        }
        if let Some(s) = row.slack {
            t[i * w + slack_col[i]] = s;
        }
        t[i * w + cols] = row.b;
    }
    for (k, &i) in artificial_rows.iter().enumerate() {
        let c = n + slack_count + k;
        t[i * w + c] = 1.0;
        basic_of_row[i] = Some(c);
    }
    let mut tab = Tableau { rows: m, cols, t, basis: basic_of_row.into_iter().map(|b| b.unwrap()).collect() };
    // Scale crash rows so the basic coefficient is 1.
    for r in 0..m {
        let b = tab.basis[r];
        let p = tab.at(r, b);
        if (p - 1.0).abs() > 0.0 {
            for v in &mut tab.t[r * w..(r + 1) * w] {
                *v /= p;
            }
        }
    }

    let is_artificial = |c: usize| c >= n + slack_count;
    if !artificial_rows.is_empty() {
        let mut obj = vec![0.0; w];
        for c in n + slack_count..cols {
            obj[c] = 1.0;
        }
        for r in 0..m {
            if is_artificial(tab.basis[r]) {
                for c in 0..w {
                    obj[c] -= tab.t[r * w + c];
                }
            }
        }
        let allowed = vec![true; cols];
        tab.optimize(&mut obj, &allowed)?;
        let infeasibility = -obj[cols];
        let scale = 1.0 + rows.iter().map(|r| r.b).fold(0.0, f64::max);
        if infeasibility > 1e-7 * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if is_artificial(tab.basis[r]) {
                if let Some(c) = (0..n + slack_count).find(|&c| tab.at(r, c).abs() > EPS) {
                    let mut dummy = vec![0.0; w];
                    tab.pivot(r, c, &mut dummy);
                }
            }
        }
    }

    let mut obj = vec![0.0; w];
    obj[..n].copy_from_slice(&lp.costs);
    for r in 0..m {
        let cb = if tab.basis[r] < n { lp.costs[tab.basis[r]] } else { 0.0 };
        if cb != 0.0 {
            for c in 0..w {
                obj[c] -= cb * tab.t[r * w + c];
            }
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|c| !is_artificial(c)).collect();
    if !tab.optimize(&mut obj, &allowed)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs(r).max(0.0);
        }
    }
    let objective = x.iter().zip(&lp.costs).map(|(x, c)| x * c).sum();
    Ok(LpOutcome::Optimal { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(lp: &LinearProgram) -> (Vec<f64>, f64) {
        match solve_lp(lp).unwrap() {
            LpOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
        let lp = LinearProgram {
            costs: vec![-3.0, -5.0],
            le: vec![(vec![1.0, 0.0], 4.0), (vec![0.0, 2.0], 12.0), (vec![3.0, 2.0], 18.0)],
            eq: vec![],
        };
        let (x, obj) = optimal(&lp);
        assert!((obj + 36.0).abs() < 1e-9);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_needs_phase_one() {
        // min x + 2y st x + y = 3, x - y >= -1 (as -x + y <= 1), x <= 2.
        let lp = LinearProgram {
            costs: vec![1.0, 2.0],
            le: vec![(vec![-1.0, 1.0], 1.0), (vec![1.0, 0.0], 2.0)],
            eq: vec![(vec![1.0, 1.0], 3.0)],
        };
        let (x, obj) = optimal(&lp);
        assert!((obj - 4.0).abs() < 1e-9, "{x:?}");
    }

    #[test]
    fn negative_rhs_and_infeasible() {
        // x + y >= 2 written as -x - y <= -2, min x + y -> 2.
        let lp = LinearProgram { costs: vec![1.0, 1.0], le: vec![(vec![-1.0, -1.0], -2.0)], eq: vec![] };
        assert!((optimal(&lp).1 - 2.0).abs() < 1e-9);
        let lp = LinearProgram {
            costs: vec![1.0],
            le: vec![(vec![1.0], 1.0)],
            eq: vec![(vec![1.0], 2.0)],
        };
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn unbounded() {
        let lp = LinearProgram { costs: vec![-1.0, 0.0], le: vec![(vec![0.0, 1.0], 1.0)], eq: vec![] };
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram {
            costs: vec![1.0, 3.0],
            le: vec![],
            eq: vec![(vec![1.0, 1.0], 1.0), (vec![2.0, 2.0], 2.0)],
        };
        let (x, obj) = optimal(&lp);
        assert!((obj - 1.0).abs() < 1e-9 && (x[0] - 1.0).abs() < 1e-9);
    }
}
