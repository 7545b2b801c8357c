//! Support intervals and particle ensembles (empirical Schoenberg measures).

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Compact support `[lower, upper]` for the scale parameter of a radial kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportInterval {
    lower: f64,
    upper: f64,
}

impl SupportInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower >= 0.0 && lower < upper) {
            return Err(Error::InvalidParameter {
                name: "support",
                reason: format!("need 0 <= lower < upper < inf, got [{lower}, {upper}]"),
            });
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// N scalar particles on a support interval; the empirical measure
/// `(1/N) sum_k delta(xi_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    particles: Vec<f64>,
    support: SupportInterval,
}

impl ParticleEnsemble {
    /// Fails if the ensemble is empty or any particle lies outside `support`.
    pub fn new(particles: Vec<f64>, support: SupportInterval) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidParameter {
                name: "particles",
                reason: "ensemble needs at least one particle".into(),
            });
        }
        if let Some(bad) = particles.iter().find(|p| !support.contains(**p)) {
            return Err(Error::InvalidParameter {
                name: "particles",
                reason: format!("particle {bad} outside [{}, {}]", support.lower(), support.upper()),
            });
        }
        Ok(Self { particles, support })
    }

    /// Clamp arbitrary values onto the support.
    pub fn projected(values: Vec<f64>, support: SupportInterval) -> Result<Self> {
        let particles = values.into_iter().map(|v| support.clamp(v)).collect();
        Self::new(particles, support)
    }

    /// `count` i.i.d. uniform draws on the support.
    pub fn uniform(count: usize, support: SupportInterval, rng: &mut RandomSource) -> Result<Self> {
        let particles = (0..count)
            .map(|_| rng.uniform(support.lower(), support.upper()))
            .collect();
        Self::new(particles, support)
    }

    /// Single-particle ensemble; the Gaussian kernel `exp(-xi |x-y|^2)`.
    pub fn gaussian(xi: f64) -> Result<Self> {
        let upper = if xi > 0.0 { xi * 2.0 } else { 1.0 };
        Self::new(vec![xi], SupportInterval::new(0.0, upper)?)
    }

    pub fn particles(&self) -> &[f64] {
        &self.particles
    }

    pub fn support(&self) -> SupportInterval {
        self.support
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Atoms of the empirical measure: `(location, 1/N)` pairs.
    pub fn empirical_measure_weights(&self) -> Vec<(f64, f64)> {
        let mass = 1.0 / self.particles.len() as f64;
        self.particles.iter().map(|&p| (p, mass)).collect()
    }

    pub fn mean(&self) -> f64 {
        self.particles.iter().sum::<f64>() / self.len() as f64
    }

    pub(crate) fn with_particles(&self, particles: Vec<f64>) -> Self {
        Self {
            particles,
            support: self.support,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> SupportInterval {
        SupportInterval::new(0.0, 10.0).unwrap()
    }

    #[test]
    fn support_rejects_bad_bounds() {
        assert!(SupportInterval::new(-1.0, 1.0).is_err());
        assert!(SupportInterval::new(2.0, 2.0).is_err());
        assert!(SupportInterval::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn weights_examples() {
        let e = ParticleEnsemble::new(vec![2.0], unit()).unwrap();
        assert_eq!(e.empirical_measure_weights(), vec![(2.0, 1.0)]);
        let e = ParticleEnsemble::new(vec![1.0, 3.0], unit()).unwrap();
        assert_eq!(e.empirical_measure_weights(), vec![(1.0, 0.5), (3.0, 0.5)]);
        let e = ParticleEnsemble::new(vec![4.0; 5], unit()).unwrap();
        let w = e.empirical_measure_weights();
        assert_eq!(w.len(), 5);
        assert!(w.iter().all(|&(x, m)| x == 4.0 && m == 0.2));
    }

    #[test]
    fn rejects_out_of_support() {
        assert!(ParticleEnsemble::new(vec![11.0], unit()).is_err());
        assert!(ParticleEnsemble::new(vec![], unit()).is_err());
    }

    proptest! {
        #[test]
        fn masses_sum_to_one(xs in proptest::collection::vec(0.0f64..10.0, 1..200)) {
            let e = ParticleEnsemble::new(xs, unit()).unwrap();
            let total: f64 = e.empirical_measure_weights().iter().map(|w| w.1).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn projection_is_idempotent(xs in proptest::collection::vec(-5.0f64..15.0, 1..50)) {
            let once = ParticleEnsemble::projected(xs, unit()).unwrap();
            let twice = ParticleEnsemble::projected(once.particles().to_vec(), unit()).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
