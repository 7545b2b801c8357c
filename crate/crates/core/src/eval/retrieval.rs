//! Precision and recall for code-based retrieval.

use std::collections::HashSet;

use crate::dataset::squared_distance;

/// `(|rel ∩ ret| / |ret|, |rel ∩ ret| / |rel|)`; an empty denominator gives 1.
pub fn precision_recall(retrieved: &HashSet<usize>, relevant: &HashSet<usize>) -> (f64, f64) {
    let hits = retrieved.intersection(relevant).count() as f64;
    let precision = if retrieved.is_empty() {
        1.0
    } else {
        hits / retrieved.len() as f64
    };
    let recall = if relevant.is_empty() {
        1.0
    } else {
        hits / relevant.len() as f64
    };
    (precision, recall)
}

/// Indices of the `k` Euclidean nearest neighbors of `points[query]`,
/// excluding the query itself.
pub fn nominal_neighbors(points: &[Vec<f64>], query: usize, k: usize) -> HashSet<usize> {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != query)
        .map(|(i, p)| (squared_distance(p, &points[query]), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Sweep every distinct code distance as a threshold `r` and retrieve the
/// items within `r`. Returns `(threshold, precision, recall)` rows.
pub fn pr_curve(distances: &[(usize, u64)], relevant: &HashSet<usize>) -> Vec<(u64, f64, f64)> {
    let mut thresholds: Vec<u64> = distances.iter().map(|d| d.1).collect();
    thresholds.sort_unstable();
    thresholds.dedup();
    thresholds
        .into_iter()
        .map(|r| {
            let retrieved: HashSet<usize> = distances.iter().filter(|d| d.1 <= r).map(|d| d.0).collect();
            let (p, rec) = precision_recall(&retrieved, relevant);
            (r, p, rec)
        })
        .collect()
}
