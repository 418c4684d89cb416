//! Rectangular linear assignment (Kuhn-Munkres with potentials, O(n^2 m)).

/// Minimum-cost assignment on a row-major `rows x cols` matrix of finite
/// costs. Every row is assigned when `rows <= cols`, every column otherwise.
/// Returns the column assigned to each row.
pub fn minimize(costs: &[f64], rows: usize, cols: usize) -> Vec<Option<usize>> {
    assert_eq!(costs.len(), rows * cols, "cost matrix shape");
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        solve(|r, c| costs[r * cols + c], rows, cols)
    } else {
        let by_col = solve(|c, r| costs[r * cols + c], cols, rows);
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        out
    }
}

/// Core routine for `n <= m`, 1-based internally.
fn solve(a: impl Fn(usize, usize) -> f64, n: usize, m: usize) -> Vec<Option<usize>> {
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    // p[j]: row matched to column j (0 = none); way[j]: previous column on the
    // shortest augmenting path
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
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

    let mut out = vec![None; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(costs: &[f64], rows: usize, cols: usize) -> f64 {
        // all injections of the smaller side into the larger one
        fn rec(costs: &[f64], rows: usize, cols: usize, r: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if r == rows {
                *best = best.min(acc);
                return;
            }
            for c in 0..cols {
                if !used[c] {
                    used[c] = true;
                    rec(costs, rows, cols, r + 1, used, acc + costs[r * cols + c], best);
                    used[c] = false;
                }
            }
        }
        let (t, tr, tc) = if rows <= cols {
            (costs.to_vec(), rows, cols)
        } else {
            let mut t = vec![0.0; rows * cols];
            for r in 0..rows {
                for c in 0..cols {
                    t[c * rows + r] = costs[r * cols + c];
                }
            }
            (t, cols, rows)
        };
        let mut best = f64::INFINITY;
        rec(&t, tr, tc, 0, &mut vec![false; tc], 0.0, &mut best);
        best
    }

    fn total(costs: &[f64], cols: usize, a: &[Option<usize>]) -> f64 {
        a.iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|c| costs[r * cols + c]))
            .sum()
    }

    #[test]
    fn two_by_two() {
        let c = [1.0, 2.0, 2.0, 4.0];
        let a = minimize(&c, 2, 2);
        assert_eq!(a, vec![Some(1), Some(0)]);
    }

    #[test]
    fn rectangular_shapes() {
        let c = [5.0, 1.0, 9.0, 2.0, 8.0, 0.5];
        let wide = minimize(&c, 2, 3);
        assert_eq!(total(&c, 3, &wide), brute(&c, 2, 3));
        let tall = minimize(&c, 3, 2);
        assert_eq!(tall.iter().filter(|x| x.is_some()).count(), 2);
        assert_eq!(total(&c, 2, &tall), brute(&c, 3, 2));
        assert!(minimize(&[], 0, 3).is_empty());
        assert_eq!(minimize(&[], 2, 0), vec![None, None]);
    }

    #[test]
    fn random_integer_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let rows = rng.random_range(1..=6);
            let cols = rng.random_range(1..=6);
            let c: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-20..50) as f64).collect();
            let a = minimize(&c, rows, cols);
            assert_eq!(total(&c, cols, &a), brute(&c, rows, cols));
        }
    }
}
