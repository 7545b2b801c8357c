//! Lloyd's k-means with k-means++ seeding, plus one-vs-all labels.

use crate::dataset::squared_distance;
use crate::error::{Error, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// `+1` for points in `positive_cluster`, `-1` otherwise.
    pub labels: Vec<f64>,
    pub positive_cluster: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn wcss(&self) -> f64 {
        *self.wcss_history.last().expect("at least one assignment step")
    }
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    sorted.dedup();
    sorted.len()
}

fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut RandomSource) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.index(points.len())].clone()];
    let mut nearest: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let mut u = rng.uniform(0.0, total);
        let mut pick = points.len() - 1;
        for (i, d) in nearest.iter().enumerate() {
            if *d > 0.0 && u < *d {
                pick = i;
                break;
            }
            u -= d;
        }
        // Guard against rounding that lands on an already chosen point.
        if nearest[pick] == 0.0 {
            pick = nearest
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
        }
        let c = points[pick].clone();
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut wcss = 0.0;
    let a = points
        .iter()
        .map(|p| {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(c, m)| (c, squared_distance(p, m)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            wcss += d;
            best
        })
        .collect();
    (a, wcss)
}

pub fn kmeans_label(
    points: &[Vec<f64>],
    k: usize,
    rng: &mut RandomSource,
    max_iterations: usize,
) -> Result<KMeansResult> {
    if k < 2 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("must be >= 2, got {k}"),
        });
    }
    let dim = points.first().map_or(0, Vec::len);
    if let Some(bad) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("{k} clusters but only {distinct} distinct points"),
        });
    }
    let mut centroids = seed_centroids(points, k, rng);
    let (mut assignments, wcss) = assign(points, &centroids);
    let mut history = vec![wcss];
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let (next, wcss) = assign(points, &centroids);
        history.push(wcss);
        if next == assignments {
            break;
        }
        assignments = next;
    }
    let positive_cluster = rng.index(k);
    let labels = assignments
        .iter()
        .map(|&a| if a == positive_cluster { 1.0 } else { -1.0 })
        .collect();
    Ok(KMeansResult {
        assignments,
        labels,
        positive_cluster,
        centroids,
        wcss_history: history,
        iterations,
    })
}
