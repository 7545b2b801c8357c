//! Labeled datasets with dense features and +/-1 labels.

use crate::error::{Error, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

/// Two labeled points drawn for one stochastic step.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub first: usize,
    pub second: usize,
    pub first_label: f64,
    pub second_label: f64,
    pub squared_distance: f64,
}

impl PairSample {
    /// `y * y~`.
    pub fn label_product(&self) -> f64 {
        self.first_label * self.second_label
    }
}

/// One unordered pair `i < j` with its squared distance and label product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub squared_distance: f64,
    pub label_product: f64,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl LabeledDataset {
    /// Build from feature rows and labels; labels must be exactly -1 or +1.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDataset("no rows".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::InvalidDataset("zero-dimensional features".into()));
        }
        let mut features = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("row {i} has a non-finite value")));
            }
            features.extend_from_slice(row);
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidDataset(format!("label {bad} is not -1 or +1")));
        }
        Ok(Self { dim, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        LabeledDataset {
            dim: self.dim,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Apply `f` to every feature row.
    pub fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<LabeledDataset> {
        let rows = self.rows().map(f).collect();
        LabeledDataset::new(rows, self.labels.clone())
    }

    pub(crate) fn require_pairs(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 samples, have {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// Two independent uniform indices (they may coincide).
    pub fn sample_pair(&self, rng: &mut RandomSource) -> Result<PairSample> {
        self.require_pairs()?;
        let i = rng.index(self.len());
        let j = rng.index(self.len());
        Ok(self.pair(i, j))
    }

    pub fn pair(&self, i: usize, j: usize) -> PairSample {
        PairSample {
            first: i,
            second: j,
            first_label: self.labels[i],
            second_label: self.labels[j],
            squared_distance: squared_distance(self.row(i), self.row(j)),
        }
    }

    /// All unordered pairs `i < j`, row-major in `(i, j)`.
    pub fn pair_terms(&self) -> Vec<PairTerm> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(PairTerm {
                    squared_distance: squared_distance(self.row(i), self.row(j)),
                    label_product: self.labels[i] * self.labels[j],
                });
            }
        }
        out
    }

    /// Largest pairwise Euclidean distance; 0 for a single point.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(squared_distance(self.row(i), self.row(j)));
            }
        }
        best.sqrt()
    }
}
