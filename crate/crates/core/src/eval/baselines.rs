//! Baseline kernel selectors: chi-square importance weighting of random
//! features and the k-nearest-neighbor Gaussian bandwidth rule.

use crate::dataset::{squared_distance, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::FeatureBank;

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceWeights {
    pub weights: Vec<f64>,
    pub chi_square_radius: f64,
    pub objective: f64,
}

/// `chi^2(w || uniform) = N sum w^2 - 1`.
pub fn chi_square_to_uniform(w: &[f64]) -> f64 {
    w.len() as f64 * w.iter().map(|v| v * v).sum::<f64>() - 1.0
}

/// Per-feature alignment `(1/(2n(n-1))) sum_{i<j} y_i y_j a_i a_j` with
/// `a_i = sqrt(2) cos(<w, x_i> + b)`.
pub fn feature_alignment_scores(bank: &FeatureBank, data: &LabeledDataset) -> Result<Vec<f64>> {
    data.require_pairs()?;
    let n = data.len() as f64;
    let mut ya = vec![0.0; bank.count()];
    let mut aa = vec![0.0; bank.count()];
    for (x, y) in data.rows().zip(data.labels()) {
        for (k, c) in bank.cosines(x)?.into_iter().enumerate() {
            let a = std::f64::consts::SQRT_2 * c;
            ya[k] += y * a;
            aa[k] += a * a;
        }
    }
    Ok(ya
        .iter()
        .zip(&aa)
        .map(|(s, q)| 0.5 * (s * s - q) / (2.0 * n * (n - 1.0)))
        .collect())
}

fn water_fill(scores: &[f64], nu: f64) -> Vec<f64> {
    let raw: Vec<f64> = scores.iter().map(|s| (s - nu).max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// Maximize `sum_m w_m s_m` over the simplex intersected with the ball
/// `chi^2(w || uniform) <= radius`. The optimum has the form
/// `w ~ (s - nu)_+`; `nu` is found by bisection on the ball constraint.
pub fn maximize_in_chi_square_ball(scores: &[f64], radius: f64) -> Result<ImportanceWeights> {
    if !(radius >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "radius",
            reason: format!("must be >= 0, got {radius}"),
        });
    }
    let n = scores.len();
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "scores",
            reason: "empty".into(),
        });
    }
    let objective = |w: &[f64]| w.iter().zip(scores).map(|(a, b)| a * b).sum::<f64>();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let top = scores.iter().filter(|&&s| s == max).count();
    if max == min || radius == 0.0 {
        let w = vec![1.0 / n as f64; n];
        let obj = objective(&w);
        return Ok(ImportanceWeights {
            weights: w,
            chi_square_radius: radius,
            objective: obj,
        });
    }
    if radius >= n as f64 / top as f64 - 1.0 {
        let w: Vec<f64> = scores
            .iter()
            .map(|&s| if s == max { 1.0 / top as f64 } else { 0.0 })
            .collect();
        let obj = objective(&w);
        return Ok(ImportanceWeights {
            weights: w,
            chi_square_radius: radius,
            objective: obj,
        });
    }
    // chi^2 of water_fill(nu) increases with nu; at nu = min - spread the
    // weights are close to uniform.
    let spread = max - min;
    let mut lo = min - spread;
    while chi_square_to_uniform(&water_fill(scores, lo)) > radius {
        lo -= 2.0 * (max - lo);
    }
    let mut hi = max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_square_to_uniform(&water_fill(scores, mid)) <= radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * spread {
            break;
        }
    }
    let w = water_fill(scores, lo);
    let obj = objective(&w);
    Ok(ImportanceWeights {
        weights: w,
        chi_square_radius: radius,
        objective: obj,
    })
}

pub fn importance_sampling_weights(
    bank: &FeatureBank,
    data: &LabeledDataset,
    radius: f64,
) -> Result<ImportanceWeights> {
    let scores = feature_alignment_scores(bank, data)?;
    maximize_in_chi_square_ball(&scores, radius)
}

/// Feature map `sqrt(2 w_k) cos(<w_k, x> + b_k)` of the reweighted bank.
pub fn weighted_feature_map(bank: &FeatureBank, weights: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != bank.count() {
        return Err(Error::DimensionMismatch {
            expected: bank.count(),
            got: weights.len(),
        });
    }
    Ok(bank
        .cosines(x)?
        .into_iter()
        .zip(weights)
        .map(|(c, w)| (2.0 * w).sqrt() * c)
        .collect())
}

/// Mean squared distance from each point to its `k`-th nearest neighbor.
pub fn knn_bandwidth(data: &LabeledDataset, k: usize) -> Result<f64> {
    let n = data.len();
    if k == 0 || n <= k {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("need 1 <= k < n, got k = {k}, n = {n}"),
        });
    }
    let per_point = crate::par::map_range(n, |i| {
        let mut d: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| squared_distance(data.row(i), data.row(j)))
            .collect();
        d.select_nth_unstable_by(k - 1, f64::total_cmp);
        d[k - 1]
    });
    Ok(per_point.iter().sum::<f64>() / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomSource;

    #[test]
    fn zero_radius_gives_uniform() {
        let r = maximize_in_chi_square_ball(&[0.1, 0.5, -0.2], 0.0).unwrap();
        assert_eq!(r.weights, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn huge_radius_puts_mass_on_the_argmax() {
        let r = maximize_in_chi_square_ball(&[0.1, 0.5, -0.2, 0.5], 1e9).unwrap();
        assert_eq!(r.weights, vec![0.0, 0.5, 0.0, 0.5]);
    }

    #[test]
    fn weights_are_feasible() {
        let mut rng = RandomSource::new(1);
        for _ in 0..50 {
            let s: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
            let radius = rng.uniform(0.0, 5.0);
            let r = maximize_in_chi_square_ball(&s, radius).unwrap();
            assert!(r.weights.iter().all(|w| *w >= 0.0));
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(chi_square_to_uniform(&r.weights) <= radius + 1e-9);
        }
    }

    #[test]
    fn matches_grid_search_on_four_features() {
        let scores = [0.3, -0.1, 0.25, 0.05];
        let radius = 0.4;
        let r = maximize_in_chi_square_ball(&scores, radius).unwrap();
        let obj = |w: [f64; 3]| {
            let w4 = 1.0 - w[0] - w[1] - w[2];
            let full = [w[0], w[1], w[2], w4];
            if w4 < -1e-15 || w.iter().any(|v| *v < 0.0) || chi_square_to_uniform(&full) > radius {
                f64::NEG_INFINITY
            } else {
                full.iter().zip(&scores).map(|(x, y)| x * y).sum()
            }
        };
        let search = |center: [f64; 3], half: f64, steps: usize| {
            let mut best = (f64::NEG_INFINITY, center);
            let h = 2.0 * half / steps as f64;
            for a in 0..=steps {
                for b in 0..=steps {
                    for c in 0..=steps {
                        let w = [
                            center[0] - half + a as f64 * h,
                            center[1] - half + b as f64 * h,
                            center[2] - half + c as f64 * h,
                        ];
                        let v = obj(w);
                        if v > best.0 {
                            best = (v, w);
                        }
                    }
                }
            }
            best
        };
        let coarse = search([0.5, 0.5, 0.5], 0.5, 100);
        let (best, _) = search(coarse.1, 0.01, 200);
        assert!(r.objective >= best - 1e-12);
        assert!(r.objective - best <= 1e-4, "{} vs {best}", r.objective);
    }

    #[test]
    fn knn_examples() {
        let line = LabeledDataset::new((0..6).map(|i| vec![0.5 * i as f64]).collect(), vec![1.0; 6]).unwrap();
        assert!((knn_bandwidth(&line, 1).unwrap() - 0.25).abs() < 1e-15);
        let dup = LabeledDataset::new(vec![vec![1.0], vec![1.0], vec![3.0], vec![3.0]], vec![1.0; 4]).unwrap();
        assert_eq!(knn_bandwidth(&dup, 1).unwrap(), 0.0);
        assert!(knn_bandwidth(&dup, 4).is_err());
    }

    #[test]
    fn knn_matches_sort_oracle() {
        let mut rng = RandomSource::new(2);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.normal()).collect()).collect();
        let data = LabeledDataset::new(rows.clone(), vec![1.0; 30]).unwrap();
        for k in [1, 3, 7] {
            let mut total = 0.0;
            for i in 0..30 {
                let mut d: Vec<f64> = (0..30)
                    .filter(|&j| j != i)
                    .map(|j| rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum())
                    .collect();
                d.sort_by(f64::total_cmp);
                total += d[k - 1];
            }
            assert!((knn_bandwidth(&data, k).unwrap() - total / 30.0).abs() < 1e-12);
        }
    }
}
