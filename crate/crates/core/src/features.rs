//! Random Fourier features for the kernel of a particle ensemble.
//!
//! The kernel `(1/N) sum_k exp(-xi_k |x-y|^2)` is a scale mixture of
//! Gaussians, so its spectral law is the mixture of `Normal(0, 2 xi_k I)`.

use std::f64::consts::PI;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::measure::ParticleEnsemble;
use crate::par;
use crate::rng::RandomSource;

/// How the mixture component of each feature is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComponentSampling {
    /// A uniformly drawn particle per feature.
    #[default]
    Mixture,
    /// Particles cycled in order, one per feature.
    Stratified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    dim: usize,
    /// Row-major `count x dim`.
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    source_particles: Vec<f64>,
    seed: u64,
}

impl FeatureBank {
    /// Assemble a bank from stored parts, e.g. after reading it from disk.
    pub fn from_parts(
        dim: usize,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
        source_particles: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let count = phases.len();
        if count == 0 || dim == 0 {
            return Err(Error::InvalidParameter {
                name: "feature_bank",
                reason: "needs at least one feature and one dimension".into(),
            });
        }
        if frequencies.len() != count * dim || source_particles.len() != count {
            return Err(Error::DimensionMismatch {
                expected: count * dim,
                got: frequencies.len(),
            });
        }
        if let Some(b) = phases.iter().find(|b| !(-PI..=PI).contains(*b)) {
            return Err(Error::InvalidParameter {
                name: "phase",
                reason: format!("{b} outside [-pi, pi]"),
            });
        }
        if frequencies.iter().chain(&source_particles).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "feature_bank",
                reason: "non-finite entry".into(),
            });
        }
        Ok(Self {
            dim,
            frequencies,
            phases,
            source_particles,
            seed,
        })
    }

    pub fn count(&self) -> usize {
        self.phases.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frequency(&self, k: usize) -> &[f64] {
        &self.frequencies[k * self.dim..(k + 1) * self.dim]
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn source_particles(&self) -> &[f64] {
        &self.source_particles
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `cos(<w_k, x> + b_k)` for every feature, without normalization.
    pub fn cosines(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok((0..self.count())
            .map(|k| {
                let dot: f64 = self.frequency(k).iter().zip(x).map(|(w, v)| w * v).sum();
                (dot + self.phases[k]).cos()
            })
            .collect())
    }

    /// Feature map for many rows at once; row-major `rows x count`.
    pub fn map_rows<'a>(&self, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Vec<Vec<f64>>> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        for r in &rows {
            self.check_dim(r)?;
        }
        Ok(par::map_range(rows.len(), |i| {
            feature_map(self, rows[i]).expect("dimension checked")
        }))
    }
}

pub fn draw_features(
    ensemble: &ParticleEnsemble,
    count: usize,
    dim: usize,
    rng: &mut RandomSource,
) -> Result<FeatureBank> {
    draw_features_with(ensemble, count, dim, rng, ComponentSampling::Mixture)
}

/// Draw `count` features: pick a particle `xi`, then `w ~ Normal(0, 2 xi I)`
/// and `b ~ Uniform[-pi, pi]`. Feature `k` uses its own substream, so the
/// bank does not depend on how the work is scheduled.
pub fn draw_features_with(
    ensemble: &ParticleEnsemble,
    count: usize,
    dim: usize,
    rng: &mut RandomSource,
    sampling: ComponentSampling,
) -> Result<FeatureBank> {
    if count == 0 || dim == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "feature count and dimension must be >= 1".into(),
        });
    }
    let particles = ensemble.particles();
    let root = RandomSource::new(rng.next_u64());
    let drawn = par::map_range(count, |k| {
        let mut local = root.child(k as u64);
        let xi = match sampling {
            ComponentSampling::Mixture => particles[local.index(particles.len())],
            ComponentSampling::Stratified => particles[k % particles.len()],
        };
        let scale = (2.0 * xi).sqrt();
        let w: Vec<f64> = (0..dim).map(|_| scale * local.normal()).collect();
        let b = local.uniform(-PI, PI);
        (w, b, xi)
    });
    let mut frequencies = Vec::with_capacity(count * dim);
    let mut phases = Vec::with_capacity(count);
    let mut source_particles = Vec::with_capacity(count);
    for (w, b, xi) in drawn {
        frequencies.extend(w);
        phases.push(b);
        source_particles.push(xi);
    }
    Ok(FeatureBank {
        dim,
        frequencies,
        phases,
        source_particles,
        seed: rng.seed(),
    })
}

/// `sqrt(2/D) cos(<w_k, x> + b_k)`; inner products estimate the kernel.
pub fn feature_map(bank: &FeatureBank, x: &[f64]) -> Result<Vec<f64>> {
    let scale = (2.0 / bank.count() as f64).sqrt();
    Ok(bank.cosines(x)?.into_iter().map(|c| scale * c).collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
