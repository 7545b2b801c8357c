//! Pegasos: stochastic subgradient descent on the regularized hinge loss.

use crate::error::{check_positive, Error, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Feature weights followed by the bias weight.
    weights: Vec<f64>,
    lambda: f64,
    /// Objective of the kept model after each epoch.
    objective_history: Vec<f64>,
}

impl LinearModel {
    pub fn zero(dim: usize, lambda: f64) -> Self {
        Self {
            weights: vec![0.0; dim + 1],
            lambda,
            objective_history: Vec::new(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights[..self.weights.len() - 1]
    }

    pub fn bias(&self) -> f64 {
        self.weights[self.weights.len() - 1]
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn objective_history(&self) -> &[f64] {
        &self.objective_history
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights().iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias()
    }

    /// `+1` when the score is non-negative.
    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.score(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `(1/n) sum max(0, 1 - y f(x)) + (lambda/2) |w|^2`, bias included in `w`.
    pub fn objective(&self, features: &[Vec<f64>], labels: &[f64]) -> f64 {
        let hinge: f64 = features
            .iter()
            .zip(labels)
            .map(|(x, y)| (1.0 - y * self.score(x)).max(0.0))
            .sum::<f64>()
            / features.len() as f64;
        hinge + 0.5 * self.lambda * self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

fn check_shapes(features: &[Vec<f64>], labels: &[f64]) -> Result<usize> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    let dim = features.first().map_or(0, Vec::len);
    if let Some(bad) = features.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    Ok(dim)
}

/// Pegasos with step `1/(lambda t)`. The model with the lowest objective
/// seen at an epoch boundary is kept, starting from the zero model.
pub fn svm_train(
    features: &[Vec<f64>],
    labels: &[f64],
    lambda: f64,
    epochs: usize,
    rng: &mut RandomSource,
) -> Result<LinearModel> {
    check_positive("lambda_svm", lambda)?;
    let dim = check_shapes(features, labels)?;
    if features.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "svm needs n >= 2, got {}",
            features.len()
        )));
    }
    let n = features.len();
    let mut w = vec![0.0; dim + 1];
    let mut best = LinearModel::zero(dim, lambda);
    let mut best_obj = best.objective(features, labels);
    let mut history = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    for _ in 0..epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &features[i];
            let y = labels[i];
            let margin = y * (w[..dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[dim]);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (v, xi) in w[..dim].iter_mut().zip(x) {
                    *v += eta * y * xi;
                }
                w[dim] += eta * y;
            }
        }
        let candidate = LinearModel {
            weights: w.clone(),
            lambda,
            objective_history: Vec::new(),
        };
        let obj = candidate.objective(features, labels);
        if obj < best_obj {
            best_obj = obj;
            best = candidate;
        }
        history.push(best_obj);
    }
    best.objective_history = history;
    Ok(best)
}

/// Fraction of sign mismatches.
pub fn svm_error(model: &LinearModel, features: &[Vec<f64>], labels: &[f64]) -> Result<f64> {
    check_shapes(features, labels)?;
    if features.is_empty() {
        return Ok(0.0);
    }
    let wrong = features
        .iter()
        .zip(labels)
        .filter(|(x, y)| model.predict(x) != **y)
        .count();
    Ok(wrong as f64 / features.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = RandomSource::new(seed);
        let truth: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let y = x
            .iter()
            .map(|r| {
                let s: f64 = r.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + 0.5 * rng.normal();
                if s >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        (x, y)
    }

    #[test]
    fn separable_pair_is_learned() {
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let y = vec![1.0, -1.0];
        let m = svm_train(&x, &y, 0.01, 50, &mut RandomSource::new(1)).unwrap();
        assert_eq!(svm_error(&m, &x, &y).unwrap(), 0.0);
    }

    #[test]
    fn heavy_regularization_shrinks_to_zero() {
        let (x, y) = random_problem(2, 40, 3);
        let m = svm_train(&x, &y, 1e6, 20, &mut RandomSource::new(2)).unwrap();
        assert!(m.weights().iter().all(|w| w.abs() < 1e-5));
        assert!(m.bias().abs() < 1e-5);
    }

    #[test]
    fn objective_beats_zero_model_and_never_increases() {
        let (x, y) = random_problem(3, 100, 5);
        let m = svm_train(&x, &y, 0.05, 30, &mut RandomSource::new(3)).unwrap();
        let zero = LinearModel::zero(5, 0.05).objective(&x, &y);
        assert_eq!(zero, 1.0);
        assert!(m.objective(&x, &y) <= zero);
        assert!(m.objective_history().windows(2).all(|w| w[1] <= w[0]));
        let again = svm_train(&x, &y, 0.05, 30, &mut RandomSource::new(3)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn error_counts_match_direct_loop() {
        let (x, y) = random_problem(4, 20, 3);
        let m = svm_train(&x, &y, 0.1, 3, &mut RandomSource::new(4)).unwrap();
        let mut wrong = 0;
        for (r, l) in x.iter().zip(&y) {
            let s: f64 = m.weights().iter().zip(r).map(|(a, b)| a * b).sum::<f64>() + m.bias();
            let p = if s >= 0.0 { 1.0 } else { -1.0 };
            if p != *l {
                wrong += 1;
            }
        }
        assert_eq!(svm_error(&m, &x, &y).unwrap(), wrong as f64 / 20.0);
        let zero = LinearModel::zero(3, 1.0);
        let balanced = vec![1.0, -1.0, 1.0, -1.0];
        assert_eq!(svm_error(&zero, &x[..4], &balanced).unwrap(), 0.5);
    }
}
