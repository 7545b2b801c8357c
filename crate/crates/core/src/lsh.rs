//! Kernel-driven locality-sensitive hashing.
//!
//! Binary codes threshold random cosine features: bit `i` is
//! `[t_i + cos(<w_i, x> + b_i) >= 0]`, and the expected normalized Hamming
//! distance between two points is `h_K(x - y)`. Q-ary codes bucket a Gaussian
//! projection of the normalized feature map `phi` into width-`q` cells and
//! reduce modulo `q`; their collision probability is `psi_q(K(x, y))`.

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::features::{self, FeatureBank};
use crate::measure::ParticleEnsemble;
use crate::objective::KernelUnderMeasure;
use crate::par;
use crate::quadrature::adaptive_simpson;
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HashCode {
    symbols: Vec<u32>,
    alphabet: u32,
}

impl HashCode {
    pub fn new(symbols: Vec<u32>, alphabet: u32) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::InvalidParameter {
                name: "alphabet",
                reason: format!("must be >= 2, got {alphabet}"),
            });
        }
        if let Some(s) = symbols.iter().find(|&&s| s >= alphabet) {
            return Err(Error::InvalidParameter {
                name: "symbol",
                reason: format!("{s} outside alphabet {alphabet}"),
            });
        }
        Ok(Self { symbols, alphabet })
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryHashFamily {
    bank: FeatureBank,
    thresholds: Vec<f64>,
}

impl BinaryHashFamily {
    /// `bits` hash functions with frequencies drawn from the ensemble's
    /// spectral law and thresholds uniform on `[-1, 1]`.
    pub fn draw(ensemble: &ParticleEnsemble, bits: usize, dim: usize, rng: &mut RandomSource) -> Result<Self> {
        let bank = features::draw_features(ensemble, bits, dim, rng)?;
        let mut local = RandomSource::new(rng.next_u64());
        let thresholds = (0..bits).map(|_| local.uniform(-1.0, 1.0)).collect();
        Ok(Self { bank, thresholds })
    }

    pub fn from_parts(bank: FeatureBank, thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() != bank.count() {
            return Err(Error::DimensionMismatch {
                expected: bank.count(),
                got: thresholds.len(),
            });
        }
        if let Some(t) = thresholds.iter().find(|t| !(-1.0..=1.0).contains(*t)) {
            return Err(Error::InvalidParameter {
                name: "threshold",
                reason: format!("{t} outside [-1, 1]"),
            });
        }
        Ok(Self { bank, thresholds })
    }

    pub fn bits(&self) -> usize {
        self.thresholds.len()
    }

    pub fn bank(&self) -> &FeatureBank {
        &self.bank
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

pub fn binary_hash(family: &BinaryHashFamily, x: &[f64]) -> Result<HashCode> {
    let cos = family.bank.cosines(x)?;
    let symbols = cos
        .iter()
        .zip(&family.thresholds)
        .map(|(c, t)| u32::from(t + c >= 0.0))
        .collect();
    Ok(HashCode { symbols, alphabet: 2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaryHashFamily {
    alphabet: u32,
    bank: FeatureBank,
    /// `code_length x bank.count()` standard normal projections.
    weights: DMatrix<f64>,
    offsets: Vec<f64>,
}

impl QaryHashFamily {
    /// Projections `w_j ~ Normal(0, I)` and offsets `t_j ~ Uniform[0, q]`.
    /// Families drawn from equal seeds share `w` and `t / q` across alphabets.
    pub fn draw(bank: FeatureBank, alphabet: u32, code_length: usize, rng: &mut RandomSource) -> Result<Self> {
        if alphabet < 2 {
            return Err(Error::InvalidParameter {
                name: "alphabet",
                reason: format!("must be >= 2, got {alphabet}"),
            });
        }
        let width = bank.count();
        let root = RandomSource::new(rng.next_u64());
        let rows = par::map_range(code_length, |j| {
            let mut local = root.child(j as u64);
            let mut w = vec![0.0; width];
            local.fill_normal(&mut w);
            let t = local.uniform(0.0, 1.0) * alphabet as f64;
            (w, t)
        });
        let mut weights = DMatrix::zeros(code_length, width);
        let mut offsets = Vec::with_capacity(code_length);
        for (j, (w, t)) in rows.into_iter().enumerate() {
            for (k, v) in w.into_iter().enumerate() {
                weights[(j, k)] = v;
            }
            offsets.push(t);
        }
        Ok(Self {
            alphabet,
            bank,
            weights,
            offsets,
        })
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn code_length(&self) -> usize {
        self.offsets.len()
    }

    pub fn bank(&self) -> &FeatureBank {
        &self.bank
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    fn symbol(&self, projection: f64, j: usize) -> u32 {
        let q = self.alphabet as f64;
        let cell = ((projection + self.offsets[j]) / q).ceil() as i64;
        cell.rem_euclid(self.alphabet as i64) as u32
    }

    /// Hash several points with one matrix product.
    pub fn hash_many(&self, points: &[&[f64]]) -> Result<Vec<HashCode>> {
        let width = self.bank.count();
        let mut phi = DMatrix::zeros(width, points.len());
        for (c, x) in points.iter().enumerate() {
            let f = features::feature_map(&self.bank, x)?;
            phi.column_mut(c).copy_from_slice(&f);
        }
        let proj = &self.weights * phi;
        Ok((0..points.len())
            .map(|c| HashCode {
                symbols: (0..self.code_length()).map(|j| self.symbol(proj[(j, c)], j)).collect(),
                alphabet: self.alphabet,
            })
            .collect())
    }
}

/// Symbol `j` is `ceil((<w_j, phi(x)> + t_j) / q) mod q`, with `phi` the
/// normalized feature map so that `|phi(x) - phi(y)|^2 ~ 2 (1 - K(x, y))`.
pub fn qary_hash(family: &QaryHashFamily, x: &[f64]) -> Result<HashCode> {
    Ok(family.hash_many(&[x])?.remove(0))
}

fn check_pair(a: &HashCode, b: &HashCode) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.alphabet != b.alphabet {
        return Err(Error::InvalidParameter {
            name: "alphabet",
            reason: format!("codes over {} and {}", a.alphabet, b.alphabet),
        });
    }
    Ok(())
}

pub fn hamming_distance(a: &HashCode, b: &HashCode) -> Result<usize> {
    check_pair(a, b)?;
    Ok(a.symbols.iter().zip(&b.symbols).filter(|(x, y)| x != y).count())
}

/// `sum_i min((a_i - b_i) mod q, (b_i - a_i) mod q)`.
pub fn lee_distance(a: &HashCode, b: &HashCode, q: u32) -> Result<u64> {
    check_pair(a, b)?;
    if a.alphabet > q {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: format!("codes over alphabet {} exceed q = {q}", a.alphabet),
        });
    }
    let q = q as i64;
    Ok(a.symbols
        .iter()
        .zip(&b.symbols)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            d.rem_euclid(q).min((-d).rem_euclid(q)) as u64
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// Bound on the omitted tail.
    pub tail_bound: f64,
}

pub const DEFAULT_SERIES_TERMS: usize = 10_000;

/// `(8 / pi^2) sum_{m=1}^{terms} (1 - K(m (x - y))) / (4 m^2 - 1)`.
pub fn collision_curve_hk(k: &KernelUnderMeasure, x: &[f64], y: &[f64], terms: usize) -> Result<SeriesValue> {
    if terms == 0 {
        return Err(Error::InvalidParameter {
            name: "terms",
            reason: "must be >= 1".into(),
        });
    }
    let d2 = k.kernel_value(x, y).map(|_| crate::dataset::squared_distance(x, y))?;
    let c = 8.0 / (std::f64::consts::PI * std::f64::consts::PI);
    let mut sum = 0.0;
    // Smallest terms first to keep the partial sum accurate.
    for m in (1..=terms).rev() {
        let mf = m as f64;
        sum += (1.0 - k.at_squared_distance(mf * mf * d2)) / (4.0 * mf * mf - 1.0);
    }
    Ok(SeriesValue {
        value: c * sum,
        tail_bound: c / (2.0 * terms as f64 - 1.0),
    })
}

pub const DEFAULT_QUADRATURE_TOLERANCE: f64 = 1e-10;

/// `int_0^q exp(-s^2 / (4 (1 - u))) / sqrt(pi (1 - u)) * (1 - s / q) ds`.
pub fn psi_q(u: f64, q: u32, tolerance: f64) -> Result<f64> {
    if q < 2 {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: format!("must be >= 2, got {q}"),
        });
    }
    if !(u >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "u",
            reason: format!("must be in [0, 1], got {u}"),
        });
    }
    if u >= 1.0 {
        return Ok(1.0);
    }
    let v = 1.0 - u;
    let qf = q as f64;
    let norm = 1.0 / (std::f64::consts::PI * v).sqrt();
    let f = |s: f64| norm * (-s * s / (4.0 * v)).exp() * (1.0 - s / qf);
    // Past ~40 standard deviations the integrand is below 1e-300.
    let upper = qf.min(40.0 * (2.0 * v).sqrt());
    Ok(adaptive_simpson(f, 0.0, upper, tolerance).clamp(0.0, 1.0))
}
