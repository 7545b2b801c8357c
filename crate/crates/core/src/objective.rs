//! Kernel-target alignment, the squared-loss risk and the surrogate
//! `risk + (h/2) * sharp_sinkhorn(ensemble, reference)` with its gradients.
//!
//! Per pair with squared distance `d2` and label product `s`, the loss is
//! `(gamma * s - kbar)^2 / gamma` with `kbar = (1/N) sum_k exp(-xi_k d2)`.

use crate::dataset::{LabeledDataset, PairSample, PairTerm};
use crate::error::{check_positive, Error, Result};
use crate::measure::ParticleEnsemble;
use crate::par;
use crate::sinkhorn::{self, SinkhornParams, TransportPlan};

/// Kernel `K(x, y) = (1/N) sum_k exp(-xi_k |x - y|^2)` of an empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelUnderMeasure {
    ensemble: ParticleEnsemble,
}

impl KernelUnderMeasure {
    pub fn new(ensemble: ParticleEnsemble) -> Self {
        Self { ensemble }
    }

    pub fn ensemble(&self) -> &ParticleEnsemble {
        &self.ensemble
    }

    pub fn at_squared_distance(&self, d2: f64) -> f64 {
        mean_exp(self.ensemble.particles(), d2)
    }

    pub fn kernel_value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(self.at_squared_distance(crate::dataset::squared_distance(x, y)))
    }
}

pub fn kernel_value(k: &KernelUnderMeasure, x: &[f64], y: &[f64]) -> Result<f64> {
    k.kernel_value(x, y)
}

pub(crate) fn mean_exp(particles: &[f64], d2: f64) -> f64 {
    if d2 == 0.0 {
        return 1.0;
    }
    particles.iter().map(|xi| (-xi * d2).exp()).sum::<f64>() / particles.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub gamma: f64,
    pub lagrange_h: f64,
    pub epsilon: f64,
    pub sinkhorn_tolerance: f64,
    pub sinkhorn_max_iterations: usize,
}

impl ObjectiveConfig {
    pub fn new(gamma: f64, lagrange_h: f64, epsilon: f64) -> Self {
        Self {
            gamma,
            lagrange_h,
            epsilon,
            sinkhorn_tolerance: 1e-10,
            sinkhorn_max_iterations: sinkhorn::DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("gamma", self.gamma)?;
        check_positive("epsilon", self.epsilon)?;
        crate::error::check_non_negative("lagrange_h", self.lagrange_h)?;
        Ok(())
    }

    pub fn sinkhorn_params(&self) -> SinkhornParams {
        SinkhornParams::new(self.epsilon)
            .with_tolerance(self.sinkhorn_tolerance)
            .with_max_iterations(self.sinkhorn_max_iterations)
    }
}

/// `(2 / (n(n-1))) sum_{i<j} y_i y_j K(x_i, x_j)`.
pub fn alignment(k: &KernelUnderMeasure, data: &LabeledDataset) -> Result<f64> {
    data.require_pairs()?;
    let terms = data.pair_terms();
    let total: f64 = terms
        .iter()
        .map(|t| t.label_product * k.at_squared_distance(t.squared_distance))
        .sum();
    Ok(total / terms.len() as f64)
}

/// Gradient of [`alignment`] with respect to each particle.
pub fn alignment_gradient(ensemble: &ParticleEnsemble, data: &LabeledDataset) -> Result<Vec<f64>> {
    data.require_pairs()?;
    let terms = data.pair_terms();
    let xs = ensemble.particles();
    let scale = 1.0 / (terms.len() as f64 * xs.len() as f64);
    Ok(xs
        .iter()
        .map(|xi| {
            -scale
                * terms
                    .iter()
                    .map(|t| t.label_product * t.squared_distance * (-xi * t.squared_distance).exp())
                    .sum::<f64>()
        })
        .collect())
}

fn risk_from_terms(particles: &[f64], terms: &[PairTerm], gamma: f64) -> f64 {
    let total = par::sum_range(terms.len(), |p| {
        let t = terms[p];
        let r = gamma * t.label_product - mean_exp(particles, t.squared_distance);
        r * r
    });
    total / (terms.len() as f64 * gamma)
}

/// Squared-loss risk `(2 / (n(n-1) gamma)) sum_{i<j} (gamma y_i y_j - K_ij)^2`.
pub fn regularized_risk(k: &KernelUnderMeasure, data: &LabeledDataset, cfg: &ObjectiveConfig) -> Result<f64> {
    cfg.validate()?;
    data.require_pairs()?;
    Ok(risk_from_terms(k.ensemble.particles(), &data.pair_terms(), cfg.gamma))
}

/// Risk on raw particle values, which need not lie in a support interval.
pub fn risk_points(particles: &[f64], data: &LabeledDataset, gamma: f64) -> Result<f64> {
    data.require_pairs()?;
    check_positive("gamma", gamma)?;
    Ok(risk_from_terms(particles, &data.pair_terms(), gamma))
}

/// Full surrogate `risk + (h/2) * sharp_sinkhorn(particles, reference)`.
pub fn surrogate_points(
    particles: &[f64],
    reference: &[f64],
    data: &LabeledDataset,
    cfg: &ObjectiveConfig,
) -> Result<f64> {
    cfg.validate()?;
    let mut value = risk_points(particles, data, cfg.gamma)?;
    if cfg.lagrange_h > 0.0 {
        let d = sinkhorn::sinkhorn_divergence_points(particles, reference, cfg.sinkhorn_params(), None)?;
        value += 0.5 * cfg.lagrange_h * d.value;
    }
    Ok(value)
}

pub fn surrogate(
    ensemble: &ParticleEnsemble,
    data: &LabeledDataset,
    cfg: &ObjectiveConfig,
    reference: &ParticleEnsemble,
) -> Result<f64> {
    surrogate_points(ensemble.particles(), reference.particles(), data, cfg)
}

/// Derivative of the single-pair loss `(gamma s - kbar)^2 / gamma`.
pub fn pair_risk_gradient(particles: &[f64], label_product: f64, d2: f64, gamma: f64) -> Vec<f64> {
    let n = particles.len() as f64;
    if d2 == 0.0 {
        return vec![0.0; particles.len()];
    }
    let e: Vec<f64> = particles.iter().map(|xi| (-xi * d2).exp()).collect();
    let kbar = e.iter().sum::<f64>() / n;
    let factor = 2.0 * (gamma * label_product - kbar) * d2 / (gamma * n);
    e.into_iter().map(|ek| factor * ek).collect()
}

fn check_sizes(ensemble: &[f64], reference: &[f64]) -> Result<()> {
    if ensemble.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.len(),
            got: reference.len(),
        });
    }
    Ok(())
}

/// Add `(h/2) * grad sharp_sinkhorn` into `grad`, returning the plan used.
fn add_transport_term(
    grad: &mut [f64],
    particles: &[f64],
    reference: &[f64],
    cfg: &ObjectiveConfig,
    warm_start: Option<&TransportPlan>,
) -> Result<Option<TransportPlan>> {
    if cfg.lagrange_h == 0.0 {
        return Ok(None);
    }
    let plan = sinkhorn::sinkhorn_plan_points(particles, reference, cfg.sinkhorn_params(), warm_start)?;
    let g = sinkhorn::sinkhorn_gradient_points(particles, reference, &plan)?;
    for (a, b) in grad.iter_mut().zip(g) {
        *a += 0.5 * cfg.lagrange_h * b;
    }
    Ok(Some(plan))
}

/// Stochastic gradient at one sampled pair, warm-starting Sinkhorn from an
/// earlier plan when one is supplied. Returns the plan it solved for.
pub fn stochastic_gradient_warm(
    particles: &[f64],
    pair: &PairSample,
    cfg: &ObjectiveConfig,
    reference: &[f64],
    warm_start: Option<&TransportPlan>,
) -> Result<(Vec<f64>, Option<TransportPlan>)> {
    cfg.validate()?;
    check_sizes(particles, reference)?;
    let mut grad = pair_risk_gradient(particles, pair.label_product(), pair.squared_distance, cfg.gamma);
    let plan = add_transport_term(&mut grad, particles, reference, cfg, warm_start)?;
    Ok((grad, plan))
}

pub fn stochastic_gradient(
    ensemble: &ParticleEnsemble,
    pair: &PairSample,
    cfg: &ObjectiveConfig,
    reference: &ParticleEnsemble,
) -> Result<Vec<f64>> {
    stochastic_gradient_warm(ensemble.particles(), pair, cfg, reference.particles(), None).map(|(g, _)| g)
}

const PAIR_CHUNK: usize = 512;

fn risk_gradient_from_terms(particles: &[f64], terms: &[PairTerm], gamma: f64) -> Vec<f64> {
    let n = particles.len();
    let chunks = terms.len().div_ceil(PAIR_CHUNK);
    let partials = par::map_range(chunks, |c| {
        let mut acc = vec![0.0; n];
        for t in &terms[c * PAIR_CHUNK..((c + 1) * PAIR_CHUNK).min(terms.len())] {
            let g = pair_risk_gradient(particles, t.label_product, t.squared_distance, gamma);
            for (a, b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
        acc
    });
    let mut out = vec![0.0; n];
    for p in partials {
        for (a, b) in out.iter_mut().zip(p) {
            *a += b;
        }
    }
    let scale = 1.0 / terms.len() as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

pub fn full_gradient_points(
    particles: &[f64],
    reference: &[f64],
    data: &LabeledDataset,
    cfg: &ObjectiveConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    data.require_pairs()?;
    check_sizes(particles, reference)?;
    let mut grad = risk_gradient_from_terms(particles, &data.pair_terms(), cfg.gamma);
    add_transport_term(&mut grad, particles, reference, cfg, None)?;
    Ok(grad)
}

/// Gradient of `regularized_risk + (h/2) * sinkhorn_divergence`.
pub fn full_gradient(
    ensemble: &ParticleEnsemble,
    data: &LabeledDataset,
    cfg: &ObjectiveConfig,
    reference: &ParticleEnsemble,
) -> Result<Vec<f64>> {
    full_gradient_points(ensemble.particles(), reference.particles(), data, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::SupportInterval;
    use crate::rng::RandomSource;
    use proptest::prelude::*;

    fn support() -> SupportInterval {
        SupportInterval::new(0.0, 10.0).unwrap()
    }

    fn ens(xs: &[f64]) -> ParticleEnsemble {
        ParticleEnsemble::new(xs.to_vec(), support()).unwrap()
    }

    fn random_data(rng: &mut RandomSource, n: usize, d: usize) -> LabeledDataset {
        let rows = (0..n)
            .map(|_| (0..d).map(|_| rng.uniform(0.0, 1.0)).collect())
            .collect();
        let labels = (0..n)
            .map(|_| if rng.uniform(0.0, 1.0) < 0.5 { -1.0 } else { 1.0 })
            .collect();
        LabeledDataset::new(rows, labels).unwrap()
    }

    fn random_particles(rng: &mut RandomSource, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.uniform(0.1, 3.0)).collect()
    }

    fn central(f: impl Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
        let mut p = x.to_vec();
        p[k] += h;
        let mut m = x.to_vec();
        m[k] -= h;
        (f(&p) - f(&m)) / (2.0 * h)
    }

    #[test]
    fn kernel_examples() {
        let k = KernelUnderMeasure::new(ens(&[0.3, 2.0]));
        assert_eq!(k.kernel_value(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        let k0 = KernelUnderMeasure::new(ens(&[0.0]));
        assert_eq!(k0.kernel_value(&[0.0], &[7.0]).unwrap(), 1.0);
        let kl = KernelUnderMeasure::new(ens(&[std::f64::consts::LN_2]));
        assert!((kl.kernel_value(&[0.0], &[1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(k.kernel_value(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn alignment_examples() {
        let k = KernelUnderMeasure::new(ens(&[0.0]));
        let opposite = LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![1.0, -1.0]).unwrap();
        assert_eq!(alignment(&k, &opposite).unwrap(), -1.0);
        let same = LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(alignment(&k, &same).unwrap(), 1.0);
        let single = LabeledDataset::new(vec![vec![0.0]], vec![1.0]).unwrap();
        assert!(alignment(&k, &single).is_err());
    }

    #[test]
    fn alignment_matches_double_loop() {
        let mut rng = RandomSource::new(3);
        let data = random_data(&mut rng, 4, 3);
        let xs = random_particles(&mut rng, 5);
        let k = KernelUnderMeasure::new(ens(&xs));
        let mut direct = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                let d2: f64 = data
                    .row(i)
                    .iter()
                    .zip(data.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let kv: f64 = xs.iter().map(|x| (-x * d2).exp()).sum::<f64>() / 5.0;
                direct += data.label(i) * data.label(j) * kv;
            }
        }
        direct /= 6.0;
        assert!((alignment(&k, &data).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn risk_examples() {
        let k = KernelUnderMeasure::new(ens(&[0.0]));
        let cfg = ObjectiveConfig::new(1.0, 0.0, 0.1);
        let same = LabeledDataset::new(vec![vec![0.0], vec![1.0], vec![4.0]], vec![1.0; 3]).unwrap();
        assert_eq!(regularized_risk(&k, &same, &cfg).unwrap(), 0.0);
        let opposite = LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![1.0, -1.0]).unwrap();
        assert_eq!(regularized_risk(&k, &opposite, &cfg).unwrap(), 4.0);
    }

    #[test]
    fn risk_matches_direct_formula() {
        let mut rng = RandomSource::new(8);
        let data = random_data(&mut rng, 5, 2);
        let xs = random_particles(&mut rng, 3);
        let gamma = 0.7;
        let mut direct = 0.0;
        for i in 0..5 {
            for j in (i + 1)..5 {
                let d2: f64 = data
                    .row(i)
                    .iter()
                    .zip(data.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let kv: f64 = xs.iter().map(|x| (-x * d2).exp()).sum::<f64>() / 3.0;
                direct += (gamma * data.label(i) * data.label(j) - kv).powi(2);
            }
        }
        direct *= 2.0 / (5.0 * 4.0 * gamma);
        let cfg = ObjectiveConfig::new(gamma, 0.0, 0.1);
        let got = regularized_risk(&KernelUnderMeasure::new(ens(&xs)), &data, &cfg).unwrap();
        assert!((got - direct).abs() < 1e-12);
    }

    #[test]
    fn zero_distance_pair_has_zero_risk_gradient() {
        let g = pair_risk_gradient(&[0.5, 1.0, 2.0], -1.0, 0.0, 3.0);
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn single_pair_gradient_matches_finite_difference() {
        let loss = |xs: &[f64]| (1.0 - mean_exp(xs, 1.0)).powi(2);
        let x = [0.0];
        let g = pair_risk_gradient(&x, 1.0, 1.0, 1.0);
        let fd = central(loss, &x, 0, 1e-6);
        // At xi = 0 the loss is 0; use an interior point as well.
        assert!((g[0] - fd).abs() <= 1e-6);
        let x = [0.7];
        let g = pair_risk_gradient(&x, 1.0, 1.0, 1.0);
        let fd = central(loss, &x, 0, 1e-6);
        assert!(((g[0] - fd) / fd).abs() <= 1e-6);
        assert!(g[0] > 0.0, "descent lowers xi so the kernel approaches 1");
    }

    #[test]
    fn transport_part_is_antisymmetric_for_symmetric_configuration() {
        let x = ens(&[4.0, 6.0]);
        let cfg = ObjectiveConfig::new(1.0, 2.0, 0.5);
        let pair = PairSample {
            first: 0,
            second: 0,
            first_label: 1.0,
            second_label: 1.0,
            squared_distance: 0.0,
        };
        let g = stochastic_gradient(&x, &pair, &cfg, &x).unwrap();
        assert!((g[0] + g[1]).abs() < 1e-10);
    }

    #[test]
    fn full_gradient_zero_at_minimum() {
        let data = LabeledDataset::new(vec![vec![0.0], vec![1.0], vec![3.0]], vec![-1.0; 3]).unwrap();
        let x = ens(&[0.0]);
        let cfg = ObjectiveConfig::new(1.0, 0.0, 0.1);
        assert_eq!(full_gradient(&x, &data, &cfg, &x).unwrap(), vec![0.0]);
    }

    #[test]
    fn stationary_point_of_scalar_toy_problem() {
        // One pair with d2 = 1 and label product +1, one particle, gamma = 2:
        // risk is (2 - e^{-xi})^2 / 2, minimized on [0, inf) at the boundary,
        // so add transport toward reference zeta = 1 with h = 2 and solve
        // d/dxi [ (2 - e^{-xi})^2 / 2 + (xi - 1)^2 ] = 0 by bisection.
        let data = LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0]).unwrap();
        let cfg = ObjectiveConfig::new(2.0, 2.0, 0.1);
        let deriv = |xi: f64| (2.0 - (-xi).exp()) * (-xi).exp() + 2.0 * (xi - 1.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if deriv(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let xi = 0.5 * (lo + hi);
        let g = full_gradient_points(&[xi], &[1.0], &data, &cfg).unwrap();
        assert!(g[0].abs() <= 1e-8, "{g:?}");
    }

    #[test]
    fn full_gradient_matches_finite_differences() {
        let mut rng = RandomSource::new(11);
        for h in [0.0, 1.0] {
            let data = random_data(&mut rng, 6, 3);
            let xs = random_particles(&mut rng, 4);
            let zs = random_particles(&mut rng, 4);
            let cfg = ObjectiveConfig {
                sinkhorn_tolerance: 1e-13,
                sinkhorn_max_iterations: 1_000_000,
                ..ObjectiveConfig::new(0.5, h, 0.1)
            };
            let g = full_gradient_points(&xs, &zs, &data, &cfg).unwrap();
            let f = |p: &[f64]| surrogate_points(p, &zs, &data, &cfg).unwrap();
            for k in 0..4 {
                let fd = central(f, &xs, k, 1e-5);
                assert!(
                    (g[k] - fd).abs() <= 1e-6 * fd.abs().max(1e-3),
                    "h={h} k={k}: {} vs {fd}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn stochastic_gradient_is_unbiased_over_ordered_pairs() {
        let mut rng = RandomSource::new(5);
        let data = random_data(&mut rng, 5, 2);
        let xs = random_particles(&mut rng, 3);
        let zs = random_particles(&mut rng, 3);
        let cfg = ObjectiveConfig::new(0.8, 1.5, 0.2);
        let n = data.len();
        let mut avg = vec![0.0; 3];
        for i in 0..n {
            for j in 0..n {
                let (g, _) = stochastic_gradient_warm(&xs, &data.pair(i, j), &cfg, &zs, None).unwrap();
                for (a, b) in avg.iter_mut().zip(g) {
                    *a += b / (n * n) as f64;
                }
            }
        }
        // Diagonal pairs contribute zero, so the ordered-pair average weights
        // the risk part by (n - 1) / n relative to the i < j average.
        let risk = risk_gradient_from_terms(&xs, &data.pair_terms(), cfg.gamma);
        let full = full_gradient_points(&xs, &zs, &data, &cfg).unwrap();
        for k in 0..3 {
            let transport = full[k] - risk[k];
            let expect = risk[k] * (n - 1) as f64 / n as f64 + transport;
            assert!((avg[k] - expect).abs() <= 1e-10, "{} vs {expect}", avg[k]);
        }
    }

    #[test]
    fn large_gamma_descent_aligns_with_alignment_ascent() {
        let mut rng = RandomSource::new(21);
        for _ in 0..5 {
            let data = random_data(&mut rng, 8, 3);
            let xs = random_particles(&mut rng, 6);
            let cfg = ObjectiveConfig::new(1e6, 0.0, 0.1);
            let descent: Vec<f64> = full_gradient_points(&xs, &xs, &data, &cfg)
                .unwrap()
                .iter()
                .map(|g| -g)
                .collect();
            let ascent = alignment_gradient(&ens(&xs), &data).unwrap();
            let dot: f64 = descent.iter().zip(&ascent).map(|(a, b)| a * b).sum();
            let na: f64 = descent.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nb: f64 = ascent.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(dot / (na * nb) > 0.999);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn alignment_is_bounded(seed in 0u64..1000, n in 2usize..8, big in proptest::collection::vec(0.0f64..10.0, 1..5)) {
            let mut rng = RandomSource::new(seed);
            let data = random_data(&mut rng, n, 2);
            let a = alignment(&KernelUnderMeasure::new(ens(&big)), &data).unwrap();
            prop_assert!(a.abs() <= 1.0 + 1e-15);
        }

        #[test]
        fn permuting_particles_permutes_gradient(seed in 0u64..1000, h in 0.0f64..3.0) {
            let mut rng = RandomSource::new(seed);
            let data = random_data(&mut rng, 5, 2);
            let xs = random_particles(&mut rng, 4);
            let zs = random_particles(&mut rng, 4);
            let cfg = ObjectiveConfig::new(1.0, h, 0.2);
            let g = full_gradient_points(&xs, &zs, &data, &cfg).unwrap();
            let perm = [2usize, 0, 3, 1];
            let px: Vec<f64> = perm.iter().map(|&i| xs[i]).collect();
            let gp = full_gradient_points(&px, &zs, &data, &cfg).unwrap();
            for (slot, &i) in perm.iter().enumerate() {
                prop_assert!((gp[slot] - g[i]).abs() <= 1e-9 * (1.0 + g[i].abs()));
            }
        }
    }
}
