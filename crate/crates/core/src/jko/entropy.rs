//! Kozachenko–Leonenko k-nearest-neighbour entropy.

use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

/// Distances below this are treated as this (duplicate points).
pub const MIN_DISTANCE: f64 = 1e-12;

/// Log volume of the unit ball in `d` dimensions.
pub fn log_unit_ball(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    h * std::f64::consts::PI.ln() - ln_gamma(h + 1.0)
}

/// Distance from every point to its `k`-th nearest neighbour (itself
/// excluded), exact.
///
/// Points are sorted along the first axis and each search widens left and
/// right until the axis gap alone exceeds the current `k`-th best distance.
pub fn knn_distances(points: &[f64], dim: usize, k: usize) -> Result<Vec<f64>> {
    assert!(dim > 0 && points.len().is_multiple_of(dim));
    let n = points.len() / dim;
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    if n <= k || k == 0 {
        return Err(Error::TooFewSamples { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a * dim].total_cmp(&points[b * dim]));
    let sorted: Vec<f64> = order
        .iter()
        .flat_map(|&i| points[i * dim..(i + 1) * dim].iter().copied())
        .collect();
    let p = |i: usize| &sorted[i * dim..(i + 1) * dim];

    let mut out = vec![0.0; n];
    // k smallest squared distances so far, ascending
    let mut best: Vec<f64> = Vec::with_capacity(k + 1);
    for i in 0..n {
        best.clear();
        let xi = p(i);
        let consider = |j: usize, best: &mut Vec<f64>| -> bool {
            let xj = p(j);
            let gap = xj[0] - xi[0];
            let gap2 = gap * gap;
            if best.len() == k && gap2 > best[k - 1] {
                return false;
            }
            let d2: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() < k || d2 < best[k - 1] {
                let pos = best.partition_point(|&v| v <= d2);
                best.insert(pos, d2);
                best.truncate(k);
            }
            true
        };
        let (mut lo, mut hi) = (i, i + 1);
        let (mut left_open, mut right_open) = (true, true);
        while left_open || right_open {
            if left_open {
                if lo == 0 {
                    left_open = false;
                } else {
                    lo -= 1;
                    left_open = consider(lo, &mut best);
                }
            }
            if right_open {
                if hi == n {
                    right_open = false;
                } else {
                    right_open = consider(hi, &mut best);
                    hi += 1;
                }
            }
        }
        out[order[i]] = best[k - 1].sqrt();
    }
    Ok(out)
}

/// `ψ(n) − ψ(k) + log V_d + (d/n)·Σ log r_i` with `r_i` the `k`-NN distance.
pub fn kl_entropy(points: &[f64], dim: usize, k: usize) -> Result<f64> {
    let r = knn_distances(points, dim, k)?;
    let n = r.len();
    Ok(entropy_offset(n, dim, k) + dim as f64 * mean_log(&r))
}

/// The sample-independent part of the estimate.
pub fn entropy_offset(n: usize, dim: usize, k: usize) -> f64 {
    digamma(n as f64) - digamma(k as f64) + log_unit_ball(dim)
}

pub(crate) fn mean_log(r: &[f64]) -> f64 {
    r.iter().map(|&d| d.max(MIN_DISTANCE).ln()).sum::<f64>() / r.len() as f64
}
