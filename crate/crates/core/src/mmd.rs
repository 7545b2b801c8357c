//! Random-feature MMD two-sample testing on the scaled-Gaussian model
//! `V ~ N(0, (1 + lambda) I)`, `W ~ N(0, (1 - lambda) I)`, optionally
//! followed by a fixed random projection to `d0` dimensions.

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::{self, FeatureBank};
use crate::par;
use crate::rng::RandomSource;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleData {
    samples_v: Vec<Vec<f64>>,
    samples_w: Vec<Vec<f64>>,
}

impl TwoSampleData {
    pub fn new(samples_v: Vec<Vec<f64>>, samples_w: Vec<Vec<f64>>) -> Result<Self> {
        if samples_v.len() < 2 || samples_w.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "two-sample data needs at least 2 points per side, got {} and {}",
                samples_v.len(),
                samples_w.len()
            )));
        }
        let dim = samples_v[0].len();
        if let Some(bad) = samples_v.iter().chain(&samples_w).find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(Self { samples_v, samples_w })
    }

    pub fn samples_v(&self) -> &[Vec<f64>] {
        &self.samples_v
    }

    pub fn samples_w(&self) -> &[Vec<f64>] {
        &self.samples_w
    }

    pub fn dim(&self) -> usize {
        self.samples_v[0].len()
    }

    pub fn swapped(&self) -> Self {
        Self {
            samples_v: self.samples_w.clone(),
            samples_w: self.samples_v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    H0,
    H1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmdOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub decision: Decision,
}

/// Sum of feature vectors and sum of their squared norms.
fn feature_sums(bank: &FeatureBank, rows: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let phis = bank.map_rows(rows.iter().map(|r| r.as_slice()))?;
    let mut sum = vec![0.0; bank.count()];
    let mut sq = 0.0;
    for phi in &phis {
        for (s, v) in sum.iter_mut().zip(phi) {
            *s += v;
        }
        sq += features::dot(phi, phi);
    }
    Ok((sum, sq))
}

/// Unbiased MMD^2 through the feature map: the two within-sample
/// U-statistics (diagonal excluded) minus twice the cross-sample mean.
pub fn mmd_unbiased(data: &TwoSampleData, bank: &FeatureBank) -> Result<f64> {
    let m = data.samples_v.len() as f64;
    let n = data.samples_w.len() as f64;
    let (sv, qv) = feature_sums(bank, &data.samples_v)?;
    let (sw, qw) = feature_sums(bank, &data.samples_w)?;
    let within_v = (features::dot(&sv, &sv) - qv) / (m * (m - 1.0));
    let within_w = (features::dot(&sw, &sw) - qw) / (n * (n - 1.0));
    let cross = features::dot(&sv, &sw) / (m * n);
    Ok(within_v + within_w - 2.0 * cross)
}

pub fn decide(statistic: f64, tau: f64) -> MmdOutcome {
    MmdOutcome {
        statistic,
        threshold: tau,
        decision: if statistic > tau { Decision::H1 } else { Decision::H0 },
    }
}

pub fn run_test(data: &TwoSampleData, bank: &FeatureBank, tau: f64) -> Result<MmdOutcome> {
    Ok(decide(mmd_unbiased(data, bank)?, tau))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    lambda: f64,
    dim: usize,
    /// Row-major `d0 x dim`, absent when no reduction is applied.
    projection: Option<Vec<f64>>,
    reduced_dim: usize,
}

impl SyntheticModel {
    /// Draws the projection (entries `Normal(0, 1/d0)`) when `d0 < dim`.
    pub fn new(lambda: f64, dim: usize, d0: usize, rng: &mut RandomSource) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be in [0, 1), got {lambda}"),
            });
        }
        if dim == 0 || d0 == 0 || d0 > dim {
            return Err(Error::InvalidParameter {
                name: "d0",
                reason: format!("need 1 <= d0 <= d, got d = {dim}, d0 = {d0}"),
            });
        }
        let projection = (d0 < dim).then(|| {
            let sd = 1.0 / (d0 as f64).sqrt();
            (0..d0 * dim).map(|_| sd * rng.normal()).collect()
        });
        Ok(Self {
            lambda,
            dim,
            projection,
            reduced_dim: d0,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn reduced_dim(&self) -> usize {
        self.reduced_dim
    }

    /// Same projection, different `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be in [0, 1), got {lambda}"),
            });
        }
        Ok(Self { lambda, ..self.clone() })
    }

    fn reduce(&self, x: Vec<f64>) -> Vec<f64> {
        match &self.projection {
            None => x,
            Some(p) => p
                .chunks_exact(self.dim)
                .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }

    fn draw(&self, variance: f64, count: usize, rng: &mut RandomSource) -> Vec<Vec<f64>> {
        let sd = variance.sqrt();
        (0..count)
            .map(|_| self.reduce((0..self.dim).map(|_| sd * rng.normal()).collect()))
            .collect()
    }

    pub fn sample(&self, m: usize, n: usize, rng: &mut RandomSource) -> Result<TwoSampleData> {
        let v = self.draw(1.0 + self.lambda, m, rng);
        let w = self.draw(1.0 - self.lambda, n, rng);
        TwoSampleData::new(v, w)
    }

    /// `m` points labeled +1 from `P_V` followed by `n` labeled -1 from `P_W`.
    pub fn labeled(&self, m: usize, n: usize, rng: &mut RandomSource) -> Result<LabeledDataset> {
        let data = self.sample(m, n, rng)?;
        let labels = std::iter::repeat_n(1.0, m)
            .chain(std::iter::repeat_n(-1.0, n))
            .collect();
        let rows = data.samples_v.into_iter().chain(data.samples_w).collect();
        LabeledDataset::new(rows, labels)
    }
}

/// Statistic of each trial; trial `t` draws its data from `rng.child(t)`, so
/// different banks evaluated with equal seeds see identical samples.
pub fn trial_statistics(
    model: &SyntheticModel,
    sizes: (usize, usize),
    trials: usize,
    bank: &FeatureBank,
    rng: &RandomSource,
) -> Result<Vec<f64>> {
    par::map_range(trials, |t| {
        let mut local = rng.child(t as u64);
        mmd_unbiased(&model.sample(sizes.0, sizes.1, &mut local)?, bank)
    })
    .into_iter()
    .collect()
}

/// Fraction of statistics above each threshold.
pub fn power_curve(statistics: &[f64], tau_grid: &[f64]) -> Vec<(f64, f64)> {
    tau_grid
        .iter()
        .map(|&tau| {
            let hits = statistics
                .iter()
                .filter(|&&s| decide(s, tau).decision == Decision::H1)
                .count();
            (tau, hits as f64 / statistics.len() as f64)
        })
        .collect()
}

/// Power of the threshold test under the model's alternative.
pub fn estimate_power(
    model: &SyntheticModel,
    sizes: (usize, usize),
    trials: usize,
    tau_grid: &[f64],
    bank: &FeatureBank,
    rng: &RandomSource,
) -> Result<Vec<(f64, f64)>> {
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            reason: "must be >= 1".into(),
        });
    }
    let stats = trial_statistics(model, sizes, trials, bank, rng)?;
    Ok(power_curve(&stats, tau_grid))
}

/// Threshold with simulated null rejection rate `level` (same projection,
/// `lambda = 0`).
pub fn null_threshold(
    model: &SyntheticModel,
    sizes: (usize, usize),
    trials: usize,
    bank: &FeatureBank,
    level: f64,
    rng: &RandomSource,
) -> Result<f64> {
    let null = model.with_lambda(0.0)?;
    let stats = trial_statistics(&null, sizes, trials, bank, rng)?;
    Ok(stats::quantile(&stats, 1.0 - level))
}

/// Largest grid threshold whose power is 1, or `-inf` when none is.
pub fn largest_full_power_tau(curve: &[(f64, f64)]) -> f64 {
    curve
        .iter()
        .filter(|(_, p)| *p >= 1.0)
        .map(|(t, _)| *t)
        .fold(f64::NEG_INFINITY, f64::max)
}
