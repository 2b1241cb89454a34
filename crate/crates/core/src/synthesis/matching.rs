//! Permutation-invariant distance between two pole multisets.

use nalgebra::ComplexField;
use num_complex::Complex;

use crate::numerics::{to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleError {
    /// Bottleneck value: min over pairings of the max pairwise distance.
    pub max: f64,
    /// Mean pairwise distance under the bottleneck pairing.
    pub mean: f64,
}

/// Optimal bottleneck assignment between `desired` and `achieved`.
///
/// Returns `None` when the multisets differ in size.
pub fn pole_error<S: Real>(desired: &[Complex<S>], achieved: &[Complex<S>]) -> Option<PoleError> {
    let n = desired.len();
    if n != achieved.len() {
        return None;
    }
    if n == 0 {
        return Some(PoleError { max: 0.0, mean: 0.0 });
    }
    let dist: Vec<Vec<f64>> = desired
        .iter()
        .map(|d| achieved.iter().map(|a| to_f64((*d - *a).modulus())).collect())
        .collect();
    let mut thresholds: Vec<f64> = dist.iter().flatten().copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (mut lo, mut hi) = (0usize, thresholds.len() - 1);
    let mut best = perfect_matching(&dist, thresholds[hi]).expect("complete graph has a matching");
    while lo < hi {
        let mid = (lo + hi) / 2;
        match perfect_matching(&dist, thresholds[mid]) {
            Some(m) => {
                best = m;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    if let Some(m) = perfect_matching(&dist, thresholds[lo]) {
        best = m;
    }
    let pairs = best.iter().enumerate().map(|(i, &j)| dist[i][j]);
    let max = pairs.clone().fold(0.0f64, f64::max);
    let mean = pairs.sum::<f64>() / n as f64;
    Some(PoleError { max, mean })
}

/// Kuhn's augmenting-path matching restricted to edges with `dist <= cap`.
/// Returns the column matched to each row.
fn perfect_matching(dist: &[Vec<f64>], cap: f64) -> Option<Vec<usize>> {
    let n = dist.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for row in 0..n {
        let mut seen = vec![false; n];
        if !augment(row, dist, cap, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut assign = vec![0; n];
    for (col, o) in owner.iter().enumerate() {
        assign[o.expect("perfect matching")] = col;
    }
    Some(assign)
}

fn augment(
    row: usize,
    dist: &[Vec<f64>],
    cap: f64,
    seen: &mut [bool],
    owner: &mut [Option<usize>],
) -> bool {
    for col in 0..dist.len() {
        if dist[row][col] <= cap && !seen[col] {
            seen[col] = true;
            if owner[col].is_none() || augment(owner[col].unwrap(), dist, cap, seen, owner) {
                owner[col] = Some(row);
                return true;
            }
        }
    }
    false
}
