//! Dense linear assignment by shortest augmenting paths with dual potentials.

/// Minimum-cost perfect matching on a square row-major cost matrix.
///
/// Returns `(total_cost, col_of_row)`. Runs in `O(m³)`.
pub fn solve(m: usize, cost: &[f64]) -> (f64, Vec<usize>) {
    assert_eq!(cost.len(), m * m, "cost matrix must be m x m");
    if m == 0 {
        return (0.0, Vec::new());
    }
    // 1-based bookkeeping; index 0 is the virtual root column.
    let mut u = vec![0.0f64; m + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut row_of_col = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut free: Vec<usize> = Vec::with_capacity(m);
    let mut used: Vec<usize> = Vec::with_capacity(m + 1);

    for i in 1..=m {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        free.clear();
        free.extend(1..=m);
        used.clear();
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        loop {
            used.push(j0);
            let i0 = row_of_col[j0];
            let row = &cost[(i0 - 1) * m..i0 * m];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut pos = 0usize;
            for (k, &j) in free.iter().enumerate() {
                let cur = row[j - 1] - ui0 - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    pos = k;
                }
            }
            for &j in &used {
                u[row_of_col[j]] += delta;
                v[j] -= delta;
            }
            for &j in &free {
                minv[j] -= delta;
            }
            j0 = free.swap_remove(pos);
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; m];
    for j in 1..=m {
        col_of_row[row_of_col[j] - 1] = j - 1;
    }
    let total = col_of_row
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * m + j])
        .sum();
    (total, col_of_row)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(m: usize, cost: &[f64]) -> f64 {
        fn rec(m: usize, cost: &[f64], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == m {
                *best = best.min(acc);
                return;
            }
            for j in 0..m {
                if !used[j] {
                    used[j] = true;
                    rec(m, cost, row + 1, used, acc + cost[row * m + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(m, cost, 0, &mut vec![false; m], 0.0, &mut best);
        best
    }

    #[test]
    fn textbook_instance() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let (total, assign) = solve(3, &cost);
        assert_eq!(total, 5.0);
        assert_eq!(assign, vec![1, 0, 2]);
    }

    #[test]
    fn matches_brute_force() {
        let mut x: u64 = 12345;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        for m in 1..=6 {
            for _ in 0..20 {
                let cost: Vec<f64> = (0..m * m).map(|_| next() * 10.0 - 3.0).collect();
                let (total, assign) = solve(m, &cost);
                let mut seen = assign.clone();
                seen.sort();
                assert_eq!(seen, (0..m).collect::<Vec<_>>());
                assert!((total - brute(m, &cost)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(solve(0, &[]), (0.0, vec![]));
    }
}
