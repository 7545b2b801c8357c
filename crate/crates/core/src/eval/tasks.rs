//! End-to-end classification runs: pick a kernel, draw random features,
//! fit a linear SVM, report errors.

use std::time::Instant;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::baselines::{importance_sampling_weights, knn_bandwidth, weighted_feature_map};
use crate::eval::svm::{svm_error, svm_train};
use crate::features::{draw_features, feature_map, FeatureBank};
use crate::langevin::{train, LangevinConfig};
use crate::measure::{ParticleEnsemble, SupportInterval};
use crate::rng::RandomSource;

/// Random split; `test_fraction` of the rows go to the second set.
pub fn train_test_split(
    data: &LabeledDataset,
    test_fraction: f64,
    rng: &mut RandomSource,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let n = data.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    if !(0.0..1.0).contains(&test_fraction) || n_test == 0 || n_test + 2 > n {
        return Err(Error::InvalidParameter {
            name: "test_fraction",
            reason: format!("{test_fraction} leaves no usable split of {n} rows"),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let (test, train) = order.split_at(n_test);
    Ok((data.subset(train), data.subset(test)))
}

/// Center and scale both sets with the training mean and standard deviation.
/// Constant columns keep unit scale.
pub fn standardize(train: &LabeledDataset, test: &LabeledDataset) -> Result<(LabeledDataset, LabeledDataset)> {
    let d = train.dim();
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for r in train.rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut sd = vec![0.0; d];
    for r in train.rows() {
        for ((s, v), m) in sd.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let sd: Vec<f64> = sd
        .into_iter()
        .zip(&mean)
        .map(|(v, m)| {
            if v.sqrt() > 1e-12 * (1.0 + m.abs()) {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let f = |r: &[f64]| r.iter().zip(&mean).zip(&sd).map(|((v, m), s)| (v - m) / s).collect();
    Ok((train.map_rows(f)?, test.map_rows(f)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelMethod {
    /// Measure learned by the constrained Langevin trainer.
    Trained,
    /// Gaussian with `xi = 1 / sigma^2` from the 3-NN rule.
    KnnBandwidth,
    /// Gaussian with `xi = 1`.
    UnitBandwidth,
    /// Reweighted features drawn from the reference measure.
    ImportanceSampling,
}

impl KernelMethod {
    pub const ALL: [KernelMethod; 4] = [
        KernelMethod::Trained,
        KernelMethod::KnnBandwidth,
        KernelMethod::UnitBandwidth,
        KernelMethod::ImportanceSampling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelMethod::Trained => "trained",
            KernelMethod::KnnBandwidth => "knn-bandwidth",
            KernelMethod::UnitBandwidth => "unit-bandwidth",
            KernelMethod::ImportanceSampling => "importance-sampling",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationConfig {
    pub support: SupportInterval,
    pub particles: usize,
    pub langevin: LangevinConfig,
    pub features: usize,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub knn_k: usize,
    pub importance_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: KernelMethod,
    pub features: usize,
    pub train_error: f64,
    pub test_error: f64,
    pub seconds: f64,
}

fn fit_and_score(
    method: KernelMethod,
    map: impl Fn(&[f64]) -> Result<Vec<f64>>,
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &ClassificationConfig,
    rng: &mut RandomSource,
    start: Instant,
) -> Result<MethodResult> {
    let xtr = train.rows().map(&map).collect::<Result<Vec<_>>>()?;
    let xte = test.rows().map(&map).collect::<Result<Vec<_>>>()?;
    let model = svm_train(&xtr, train.labels(), cfg.svm_lambda, cfg.svm_epochs, rng)?;
    Ok(MethodResult {
        method,
        features: cfg.features,
        train_error: svm_error(&model, &xtr, train.labels())?,
        test_error: svm_error(&model, &xte, test.labels())?,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Kernel measure chosen by `method` from the training set alone.
pub fn select_measure(
    method: KernelMethod,
    train_set: &LabeledDataset,
    cfg: &ClassificationConfig,
    rng: &mut RandomSource,
) -> Result<ParticleEnsemble> {
    match method {
        KernelMethod::Trained => {
            let reference = ParticleEnsemble::uniform(cfg.particles, cfg.support, rng)?;
            let mut lcfg = cfg.langevin.clone();
            lcfg.seed = rand::RngCore::next_u64(rng);
            Ok(train(&lcfg, train_set, &reference)?.ensemble)
        }
        KernelMethod::KnnBandwidth => {
            let sigma2 = knn_bandwidth(train_set, cfg.knn_k)?;
            if sigma2 <= 0.0 {
                return Err(Error::InvalidDataset(
                    "k-NN bandwidth is zero (duplicate points)".into(),
                ));
            }
            ParticleEnsemble::gaussian(1.0 / sigma2)
        }
        KernelMethod::UnitBandwidth => ParticleEnsemble::gaussian(1.0),
        KernelMethod::ImportanceSampling => ParticleEnsemble::uniform(cfg.particles, cfg.support, rng),
    }
}

/// One method on one split. Every method draws from its own child stream.
pub fn evaluate_method(
    method: KernelMethod,
    train_set: &LabeledDataset,
    test_set: &LabeledDataset,
    cfg: &ClassificationConfig,
    rng: &RandomSource,
) -> Result<MethodResult> {
    let start = Instant::now();
    let mut local = rng.child(method as u64);
    let measure = select_measure(method, train_set, cfg, &mut local)?;
    let bank: FeatureBank = draw_features(&measure, cfg.features, train_set.dim(), &mut local)?;
    if method == KernelMethod::ImportanceSampling {
        let w = importance_sampling_weights(&bank, train_set, cfg.importance_radius)?.weights;
        fit_and_score(
            method,
            |x| weighted_feature_map(&bank, &w, x),
            train_set,
            test_set,
            cfg,
            &mut local,
            start,
        )
    } else {
        fit_and_score(
            method,
            |x| feature_map(&bank, x),
            train_set,
            test_set,
            cfg,
            &mut local,
            start,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> LabeledDataset {
        let mut rng = RandomSource::new(seed);
        let rows = (0..n)
            .map(|i| vec![if i % 2 == 0 { 2.0 } else { -2.0 } + 0.3 * rng.normal(), rng.normal()])
            .collect();
        let labels = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        LabeledDataset::new(rows, labels).unwrap()
    }

    #[test]
    fn split_partitions_rows() {
        let data = toy(20, 1);
        let (a, b) = train_test_split(&data, 0.25, &mut RandomSource::new(2)).unwrap();
        assert_eq!((a.len(), b.len()), (15, 5));
        let mut all: Vec<f64> = a.rows().chain(b.rows()).map(|r| r[0]).collect();
        let mut orig: Vec<f64> = data.rows().map(|r| r[0]).collect();
        all.sort_by(f64::total_cmp);
        orig.sort_by(f64::total_cmp);
        assert_eq!(all, orig);
    }

    #[test]
    fn standardized_training_set_has_zero_mean_unit_variance() {
        let data = toy(40, 3).map_rows(|r| vec![10.0 + 5.0 * r[0], r[1], 7.0]).unwrap();
        let (tr, _) = standardize(&data, &data).unwrap();
        for j in 0..3 {
            let m = tr.rows().map(|r| r[j]).sum::<f64>() / 40.0;
            let v = tr.rows().map(|r| (r[j] - m).powi(2)).sum::<f64>() / 40.0;
            assert!(m.abs() < 1e-12, "{j} {m}");
            if j < 2 {
                assert!((v - 1.0).abs() < 1e-12);
            } else {
                assert!(v < 1e-24);
            }
        }
    }

    #[test]
    fn every_method_separates_an_easy_problem() {
        let data = toy(80, 4);
        let (tr, te) = train_test_split(&data, 0.25, &mut RandomSource::new(5)).unwrap();
        let mut langevin = LangevinConfig::new(1e-3, 1e4, 200);
        langevin.radius = 1e9;
        let cfg = ClassificationConfig {
            support: SupportInterval::new(0.0, 1.0).unwrap(),
            particles: 20,
            langevin,
            features: 200,
            svm_lambda: 1e-3,
            svm_epochs: 30,
            knn_k: 3,
            importance_radius: 1.0,
        };
        for m in KernelMethod::ALL {
            let r = evaluate_method(m, &tr, &te, &cfg, &RandomSource::new(6)).unwrap();
            assert!(r.test_error <= 0.1, "{}: {}", m.name(), r.test_error);
        }
    }
}
