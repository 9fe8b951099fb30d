/// Minimum-cost assignment (Kuhn-Munkres with potentials, O(n^2 m)).
///
/// Every row of the `rows x cols` matrix is assigned a distinct column when
/// `rows <= cols`, every column a distinct row otherwise. Returns
/// `(row, col)` pairs sorted by row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return Vec::new();
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        let mut pairs: Vec<(usize, usize)> = hungarian(&transposed).into_iter().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        return pairs;
    }

    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j]: row (1-based) matched to column j; way[j]: previous column on the augmenting path
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
    let mut pairs: Vec<(usize, usize)> = (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect();
    pairs.sort_unstable();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cost: &[Vec<f64>]) -> f64 {
        fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + go(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost[0].len()])
    }

    #[test]
    fn classic_matrix() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let pairs = hungarian(&cost);
        let total: f64 = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn rectangular_both_ways() {
        let wide = vec![vec![3.0, 1.0, 9.0, 4.0], vec![2.0, 8.0, 1.0, 7.0]];
        let pairs = hungarian(&wide);
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        let tall: Vec<Vec<f64>> = (0..4).map(|j| (0..2).map(|i| wide[i][j]).collect()).collect();
        assert_eq!(hungarian(&tall), vec![(1, 0), (2, 1)]);
    }

    proptest::proptest! {
        #[test]
        fn matches_brute_force(vals in proptest::collection::vec(-5.0f64..5.0, 20), rows in 1usize..5, cols in 1usize..5) {
            let (r, c) = (rows.min(cols), rows.max(cols));
            let cost: Vec<Vec<f64>> = (0..r).map(|i| (0..c).map(|j| vals[i * 4 + j]).collect()).collect();
            let pairs = hungarian(&cost);
            proptest::prop_assert_eq!(pairs.len(), r);
            let total: f64 = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
            proptest::prop_assert!((total - brute(&cost)).abs() < 1e-9);
        }
    }
}
