//! Min-cost bipartite matching (Hungarian algorithm with potentials).

/// Matches rows to columns minimizing total cost; `None` marks a forbidden
/// pair. Returns `(row, col)` pairs sorted by row. As many pairs as possible
/// are matched first, then the total cost is minimized.
pub fn min_cost_matching(costs: &[Vec<Option<f64>>]) -> Vec<(usize, usize)> {
    let rows = costs.len();
    let cols = costs.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let finite_max = costs.iter().flatten().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
    // Larger than any total of allowed costs, so forbidden pairs are used last.
    let forbidden = (finite_max + 1.0) * (n as f64 + 1.0) * 2.0;
    let cost = |i: usize, j: usize| -> f64 {
        let c = if transpose { costs[j][i] } else { costs[i][j] };
        c.unwrap_or(forbidden)
    };

    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| if transpose { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) })
        .filter(|&(r, c)| costs[r][c].is_some())
        .collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn total(costs: &[Vec<Option<f64>>], m: &[(usize, usize)]) -> f64 {
        m.iter().map(|&(r, c)| costs[r][c].unwrap()).sum()
    }

    #[test]
    fn empty_and_single() {
        assert!(min_cost_matching(&[]).is_empty());
        assert!(min_cost_matching(&[vec![]]).is_empty());
        assert_eq!(min_cost_matching(&[vec![Some(3.0)]]), vec![(0, 0)]);
    }

    #[test]
    fn square_matches_permutation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let costs: Vec<Vec<Option<f64>>> = (0..4).map(|_| (0..4).map(|_| Some(rng.random_range(0.0..100.0))).collect()).collect();
            let best = permutations(4)
                .iter()
                .map(|p| p.iter().enumerate().map(|(r, &c)| costs[r][c].unwrap()).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let m = min_cost_matching(&costs);
            assert_eq!(m.len(), 4);
            assert!((total(&costs, &m) - best).abs() < 1e-9);
        }
    }

    #[test]
    fn rectangular_and_forbidden() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let (r, c) = (rng.random_range(1..=5), rng.random_range(1..=5));
            let costs: Vec<Vec<Option<f64>>> = (0..r)
                .map(|_| (0..c).map(|_| rng.random_bool(0.8).then(|| rng.random_range(0.0..50.0))).collect())
                .collect();
            // Oracle: over injective maps of the smaller side, maximize matched
            // pairs then minimize cost.
            let (small, large) = (r.min(c), r.max(c));
            let mut best = (0usize, 0.0f64);
            let get = |a: usize, b: usize| if r <= c { costs[a][b] } else { costs[b][a] };
            for perm in permutations(large) {
                let mut k = 0;
                let mut cost = 0.0;
                for a in 0..small {
                    if let Some(x) = get(a, perm[a]) {
                        k += 1;
                        cost += x;
                    }
                }
                if k > best.0 || (k == best.0 && cost < best.1) {
                    best = (k, cost);
                }
            }
            let m = min_cost_matching(&costs);
            assert_eq!(m.len(), best.0);
            assert!((total(&costs, &m) - best.1).abs() < 1e-9);
            let mut rows: Vec<_> = m.iter().map(|p| p.0).collect();
            let mut cols: Vec<_> = m.iter().map(|p| p.1).collect();
            rows.dedup();
            cols.sort();
            cols.dedup();
            assert_eq!(rows.len(), m.len());
            assert_eq!(cols.len(), m.len());
        }
    }
}
