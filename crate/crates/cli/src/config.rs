//! Run configuration: one JSON document, sections per command.

use std::path::{Path, PathBuf};

use rkl::langevin::{DriftScaling, LangevinConfig};
use rkl::measure::SupportInterval;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSection,
    pub support: SupportSection,
    /// Particle count `N` of the kernel measure.
    pub particles: usize,
    /// Particle CSV from an earlier `train-kernel` run; commands that need a
    /// kernel measure fall back to a Gaussian with `xi = gaussian_xi`.
    pub particles_path: Option<PathBuf>,
    pub gaussian_xi: f64,
    pub langevin: LangevinSection,
    pub features: FeatureSection,
    pub lsh: LshSection,
    pub mmd: MmdSection,
    pub pde: PdeSection,
    pub svm: SvmSection,
    pub kmeans: KMeansSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub format: String,
    /// Standardize columns with training-set statistics.
    pub standardize: bool,
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupportSection {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LangevinSection {
    pub step_size: f64,
    pub beta: f64,
    pub steps: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub radius: f64,
    pub bisection_tolerance: f64,
    /// `exact` or `mean-field`.
    pub drift_scaling: String,
    pub step_decay: bool,
    pub snapshot_interval: usize,
    pub sinkhorn_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LshSection {
    /// Code length (bits when `alphabet = 2`).
    pub length: usize,
    pub alphabet: u32,
    /// Database codes written by `lsh-build`, read by `lsh-query`.
    pub codes_path: Option<PathBuf>,
    /// Query points; defaults to the first `queries` database rows.
    pub query_path: Option<PathBuf>,
    pub queries: usize,
    /// Size of the Euclidean nominal neighborhood.
    pub neighbors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmdSection {
    pub tau: f64,
    pub trials: usize,
    pub samples_v: usize,
    pub samples_w: usize,
    pub tau_max: f64,
    pub tau_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSection {
    pub bins: usize,
    pub beta: f64,
    pub gamma: f64,
    pub max_dt: f64,
    pub horizons: Vec<f64>,
    pub histogram_bins: usize,
    pub gibbs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSection {
    pub lambda: f64,
    pub epochs: usize,
    /// `trained`, `knn-bandwidth`, `unit-bandwidth`, `importance-sampling` or `all`.
    pub method: String,
    pub knn_k: usize,
    pub importance_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansSection {
    pub k: usize,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub lambda: f64,
    pub dim: usize,
    pub reduced_dim: usize,
    pub positives: usize,
    pub negatives: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: DataSection::default(),
            support: SupportSection::default(),
            particles: 50,
            particles_path: None,
            gaussian_xi: 1.0,
            langevin: LangevinSection::default(),
            features: FeatureSection::default(),
            lsh: LshSection::default(),
            mmd: MmdSection::default(),
            pde: PdeSection::default(),
            svm: SvmSection::default(),
            kmeans: KMeansSection::default(),
            synth: SynthSection::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            path: None,
            format: "csv".into(),
            standardize: false,
            test_fraction: 0.25,
        }
    }
}

impl Default for SupportSection {
    fn default() -> Self {
        Self {
            lower: 0.0,
            upper: 0.25,
        }
    }
}

impl Default for LangevinSection {
    fn default() -> Self {
        Self {
            step_size: 0.02,
            beta: 1e4,
            steps: 2000,
            gamma: 1e4,
            epsilon: 1e-2,
            radius: 1e9,
            bisection_tolerance: 0.05,
            drift_scaling: "exact".into(),
            step_decay: false,
            snapshot_interval: 0,
            sinkhorn_tolerance: 1e-10,
        }
    }
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self { count: 500 }
    }
}

impl Default for LshSection {
    fn default() -> Self {
        Self {
            length: 256,
            alphabet: 2,
            codes_path: None,
            query_path: None,
            queries: 10,
            neighbors: 50,
        }
    }
}

impl Default for MmdSection {
    fn default() -> Self {
        Self {
            tau: 0.05,
            trials: 100,
            samples_v: 50,
            samples_w: 50,
            tau_max: 0.5,
            tau_steps: 50,
        }
    }
}

impl Default for PdeSection {
    fn default() -> Self {
        Self {
            bins: 200,
            beta: 30.0,
            gamma: 1e4,
            max_dt: 1e-3,
            horizons: vec![0.5, 5.0, 20.0],
            histogram_bins: 50,
            gibbs: false,
        }
    }
}

impl Default for SvmSection {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 20,
            method: "all".into(),
            knn_k: 3,
            importance_radius: 1.0,
        }
    }
}

impl Default for KMeansSection {
    fn default() -> Self {
        Self {
            k: 2,
            max_iterations: 100,
        }
    }
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            dim: 10,
            reduced_dim: 10,
            positives: 100,
            negatives: 100,
        }
    }
}

fn invalid(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}` {reason}"))
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format_args!("must be finite and > 0, got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(invalid(key, format_args!("must be >= {min}, got {v}")))
    }
}

/// Parse a `--set` value as JSON, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

impl RunConfig {
    /// Defaults, then the file, then each `key=value` override in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                let file: Value =
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                // Check the file alone first so unknown keys are reported against it.
                serde_json::from_value::<RunConfig>(file.clone())
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                file
            }
            None => Value::Object(Default::default()),
        };
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{item}` is not key=value")))?;
            set_path(&mut doc, key.trim(), parse_value(raw.trim()))?;
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.support_interval()?;
        at_least("particles", self.particles, 1)?;
        positive("gaussian_xi", self.gaussian_xi)?;
        self.data_format()?;
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(invalid("data.test_fraction", "must be in (0, 1)"));
        }
        self.langevin_config()?
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        at_least("features.count", self.features.count, 1)?;
        at_least("lsh.length", self.lsh.length, 1)?;
        if self.lsh.alphabet < 2 {
            return Err(invalid("lsh.alphabet", "must be >= 2"));
        }
        at_least("lsh.queries", self.lsh.queries, 1)?;
        at_least("lsh.neighbors", self.lsh.neighbors, 1)?;
        if !self.mmd.tau.is_finite() {
            return Err(invalid("mmd.tau", "must be finite"));
        }
        at_least("mmd.trials", self.mmd.trials, 1)?;
        at_least("mmd.samples_v", self.mmd.samples_v, 2)?;
        at_least("mmd.samples_w", self.mmd.samples_w, 2)?;
        positive("mmd.tau_max", self.mmd.tau_max)?;
        at_least("mmd.tau_steps", self.mmd.tau_steps, 1)?;
        at_least("pde.bins", self.pde.bins, 2)?;
        positive("pde.beta", self.pde.beta)?;
        positive("pde.gamma", self.pde.gamma)?;
        positive("pde.max_dt", self.pde.max_dt)?;
        at_least("pde.histogram_bins", self.pde.histogram_bins, 1)?;
        if !self.pde.bins.is_multiple_of(self.pde.histogram_bins) {
            return Err(invalid("pde.histogram_bins", "must divide pde.bins"));
        }
        if self.pde.horizons.is_empty() || self.pde.horizons.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("pde.horizons", "must be a non-empty list of finite times >= 0"));
        }
        positive("svm.lambda", self.svm.lambda)?;
        at_least("svm.epochs", self.svm.epochs, 1)?;
        self.svm_methods()?;
        at_least("svm.knn_k", self.svm.knn_k, 1)?;
        if !(self.svm.importance_radius.is_finite() && self.svm.importance_radius >= 0.0) {
            return Err(invalid("svm.importance_radius", "must be finite and >= 0"));
        }
        at_least("kmeans.k", self.kmeans.k, 2)?;
        at_least("kmeans.max_iterations", self.kmeans.max_iterations, 1)?;
        if !(0.0..1.0).contains(&self.synth.lambda) {
            return Err(invalid("synth.lambda", "must be in [0, 1)"));
        }
        at_least("synth.dim", self.synth.dim, 1)?;
        if self.synth.reduced_dim == 0 || self.synth.reduced_dim > self.synth.dim {
            return Err(invalid("synth.reduced_dim", "must be in 1..=synth.dim"));
        }
        at_least("synth.positives", self.synth.positives, 1)?;
        at_least("synth.negatives", self.synth.negatives, 1)?;
        Ok(())
    }

    pub fn support_interval(&self) -> Result<SupportInterval, CliError> {
        SupportInterval::new(self.support.lower, self.support.upper).map_err(|e| invalid("support", e))
    }

    pub fn data_format(&self) -> Result<rkl::io::DataFormat, CliError> {
        self.data.format.parse().map_err(|e| invalid("data.format", e))
    }

    pub fn langevin_config(&self) -> Result<LangevinConfig, CliError> {
        let l = &self.langevin;
        let drift_scaling = match l.drift_scaling.as_str() {
            "exact" => DriftScaling::Exact,
            "mean-field" => DriftScaling::MeanField,
            other => {
                return Err(invalid(
                    "langevin.drift_scaling",
                    format_args!("unknown value `{other}`"),
                ))
            }
        };
        Ok(LangevinConfig {
            gamma: l.gamma,
            epsilon: l.epsilon,
            radius: l.radius,
            bisection_tolerance: l.bisection_tolerance,
            seed: self.seed,
            drift_scaling,
            step_decay: l.step_decay,
            snapshot_interval: l.snapshot_interval,
            sinkhorn_tolerance: l.sinkhorn_tolerance,
            ..LangevinConfig::new(l.step_size, l.beta, l.steps)
        })
    }

    pub fn svm_methods(&self) -> Result<Vec<rkl::eval::tasks::KernelMethod>, CliError> {
        use rkl::eval::tasks::KernelMethod;
        if self.svm.method == "all" {
            return Ok(KernelMethod::ALL.to_vec());
        }
        KernelMethod::ALL
            .iter()
            .find(|m| m.name() == self.svm.method)
            .map(|m| vec![*m])
            .ok_or_else(|| invalid("svm.method", format_args!("unknown method `{}`", self.svm.method)))
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Set a dotted key inside a JSON object, creating intermediate objects.
fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("`{key}` does not name a section")))?;
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| CliError::Config(format!("`{key}` does not name a section")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = RunConfig::load(
            None,
            &["langevin.steps=10".into(), "data.format=libsvm".into(), "seed=7".into()],
        )
        .unwrap();
        assert_eq!(cfg.langevin.steps, 10);
        assert_eq!(cfg.data.format, "libsvm");
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::load(None, &["langevin.stpes=10".into()]),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            RunConfig::load(None, &["nonsense=1".into()]),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn numeric_constraints_are_checked_at_load() {
        assert!(RunConfig::load(None, &["langevin.gamma=-1".into()]).is_err());
        assert!(RunConfig::load(None, &["support.upper=-1".into()]).is_err());
        assert!(RunConfig::load(None, &["pde.histogram_bins=7".into()]).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
