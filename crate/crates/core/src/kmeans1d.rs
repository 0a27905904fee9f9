//! Exact two-cluster k-means on the real line.
//!
//! An optimal 2-means partition of scalars is always a threshold split of the
//! sorted values, so the optimum is found by scanning every split between
//! distinct neighbours. The scan maximizes the between-cluster term
//! `S_L² · n / (k (n − k))` on mean-centred prefix sums, which is equivalent to
//! minimizing the within-cluster SSE and avoids the cancellation in
//! `Σx² − S²/n`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusterError {
    #[error("cannot cluster an empty vector")]
    Empty,
    #[error("cannot cluster non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub centroid_low: f64,
    pub centroid_high: f64,
    /// Largest value assigned to the low cluster; values strictly above it are high.
    pub threshold: f64,
    /// Per-value cluster (`true` = high-centroid cluster), in input order.
    pub assignment: Vec<bool>,
    /// Within-cluster sum of squared deviations.
    pub sse: f64,
    pub degenerate: bool,
}

impl ClusterResult {
    pub fn high_count(&self) -> usize {
        self.assignment.iter().filter(|&&a| a).count()
    }
}

/// Optimal 2-means of `values`.
///
/// When `max − min < epsilon` (or every value is equal) the result is flagged
/// degenerate and every value is assigned to the low cluster.
pub fn two_means_1d(values: &[f64], epsilon: f64) -> Result<ClusterResult, ClusterError> {
    if values.is_empty() {
        return Err(ClusterError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    let n = values.len();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mean = values.iter().sum::<f64>() / n as f64;

    let degenerate = || {
        let sse = values.iter().map(|v| (v - mean).powi(2)).sum();
        ClusterResult {
            centroid_low: mean,
            centroid_high: mean,
            threshold: hi,
            assignment: vec![false; n],
            sse,
            degenerate: true,
        }
    };
    if hi - lo < epsilon {
        return Ok(degenerate());
    }

    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);

    let mut best: Option<(usize, f64)> = None;
    let mut prefix = 0.0;
    for k in 1..n {
        prefix += sorted[k - 1] - mean;
        if sorted[k - 1] == sorted[k] {
            continue;
        }
        let between = prefix * prefix * n as f64 / (k as f64 * (n - k) as f64);
        if best.is_none_or(|(_, b)| between > b) {
            best = Some((k, between));
        }
    }
    let Some((k, _)) = best else {
        return Ok(degenerate());
    };

    let (left, right) = sorted.split_at(k);
    let centroid_low = left.iter().sum::<f64>() / k as f64;
    let centroid_high = right.iter().sum::<f64>() / (n - k) as f64;
    let sse = left.iter().map(|v| (v - centroid_low).powi(2)).sum::<f64>()
        + right.iter().map(|v| (v - centroid_high).powi(2)).sum::<f64>();
    let threshold = sorted[k - 1];
    Ok(ClusterResult {
        centroid_low,
        centroid_high,
        threshold,
        assignment: values.iter().map(|&v| v > threshold).collect(),
        sse,
        degenerate: false,
    })
}
