//! Minimum-cost assignment, O(n^3) shortest augmenting paths with potentials.

use crate::error::{Error, Result};

/// Solves the rectangular assignment problem for `cost` (rows x cols).
///
/// Returns `(row, col)` pairs sorted by row; every row is assigned when
/// `rows <= cols`, every column otherwise.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<(usize, usize)>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::shape("hungarian", "ragged cost matrix"));
    }
    if cost.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite assignment cost".into()));
    }
    if rows == 0 || cols == 0 {
        return Ok(Vec::new());
    }
    if rows <= cols {
        Ok(solve(rows, cols, |i, j| cost[i][j]))
    } else {
        let mut pairs: Vec<(usize, usize)> = solve(cols, rows, |i, j| cost[j][i]).into_iter().map(|(c, r)| (r, c)).collect();
        pairs.sort_unstable();
        Ok(pairs)
    }
}

/// `n <= m`; 1-based internals with a virtual column 0.
fn solve(n: usize, m: usize, a: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
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
    let mut out: Vec<(usize, usize)> = (1..=m).filter(|&j| p[j] != 0).map(|j| (p[j] - 1, j - 1)).collect();
    out.sort_unstable();
    out
}

/// Maximum-weight matching where `None` marks pairs that may not be matched.
/// Weights must be positive.
pub fn max_weight_matching(weights: &[Vec<Option<f64>>]) -> Result<Vec<(usize, usize)>> {
    let cost: Vec<Vec<f64>> = weights
        .iter()
        .map(|r| r.iter().map(|w| w.map_or(0.0, |x| -x)).collect())
        .collect();
    Ok(hungarian(&cost)?
        .into_iter()
        .filter(|&(i, j)| weights[i][j].is_some())
        .collect())
}

pub fn assignment_cost(cost: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| cost[i][j]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_known_case() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let p = hungarian(&c).unwrap();
        assert_eq!(assignment_cost(&c, &p), 5.0);
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn rectangular_both_ways() {
        let c = vec![vec![1.0, 9.0, 0.5], vec![9.0, 1.0, 9.0]];
        let p = hungarian(&c).unwrap();
        assert_eq!(p, vec![(0, 2), (1, 1)]);
        let t: Vec<Vec<f64>> = (0..3).map(|j| (0..2).map(|i| c[i][j]).collect()).collect();
        assert_eq!(hungarian(&t).unwrap(), vec![(1, 1), (2, 0)]);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(hungarian(&[vec![1.0, f64::NAN]]), Err(Error::Numeric(_))));
        assert!(hungarian(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(hungarian(&[]).unwrap().is_empty());
    }

    #[test]
    fn masked_pairs_are_dropped() {
        let w = vec![vec![Some(1.0), None], vec![None, None]];
        assert_eq!(max_weight_matching(&w).unwrap(), vec![(0, 0)]);
    }
}
