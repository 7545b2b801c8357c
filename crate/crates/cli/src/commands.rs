//! Subcommand implementations. Each returns its metrics and the artifacts it
//! wrote; `run` wraps them into the JSON summary.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rkl::dataset::{squared_distance, LabeledDataset};
use rkl::eval::tasks::{evaluate_method, standardize, train_test_split, ClassificationConfig};
use rkl::eval::{kmeans_label, pr_curve, precision_recall};
use rkl::features::{draw_features, feature_map};
use rkl::io;
use rkl::langevin::train;
use rkl::lsh::{binary_hash, hamming_distance, BinaryHashFamily, HashCode, QaryHashFamily};
use rkl::meanfield::{compare_particles_to_density, evolve, gibbs_fixed_point_with, DensityGrid, MeanFieldProblem};
use rkl::measure::ParticleEnsemble;
use rkl::mmd::{largest_full_power_tau, power_curve, run_test, trial_statistics, SyntheticModel, TwoSampleData};
use rkl::objective::{alignment, KernelUnderMeasure};
use rkl::rng::RandomSource;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::{CliError, InModule};

#[derive(Debug, Parser)]
#[command(
    name = "rkl",
    version,
    about = "Learn radial kernels as particle measures and use them"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set langevin.steps=500`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Shorthand for `--set data.path=...`.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Train a kernel measure with the constrained Langevin optimizer.
    TrainKernel,
    /// Draw random Fourier features and map the dataset.
    Features,
    /// Hash a dataset into binary or q-ary codes.
    LshBuild,
    /// Retrieve neighbors from stored codes and score against Euclidean neighbors.
    LshQuery,
    /// Two-sample MMD test and power curve.
    MmdTest,
    /// Solve the mean-field equation for the particle density.
    PdeSimulate,
    /// Linear SVM on random features for each kernel choice.
    Svm,
    /// Relabel points by k-means, one cluster against the rest.
    KmeansLabel,
    /// Generate the synthetic Gaussian two-class dataset.
    SynthData {
        /// Shorthand for `--set synth.lambda=...`.
        #[arg(long)]
        lambda: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TrainKernel => "train-kernel",
            Command::Features => "features",
            Command::LshBuild => "lsh-build",
            Command::LshQuery => "lsh-query",
            Command::MmdTest => "mmd-test",
            Command::PdeSimulate => "pde-simulate",
            Command::Svm => "svm",
            Command::KmeansLabel => "kmeans-label",
            Command::SynthData { .. } => "synth-data",
        }
    }
}

// Substreams of the run seed, one per consumer.
const STREAM_REFERENCE: u64 = 1;
const STREAM_FEATURES: u64 = 2;
const STREAM_MODEL: u64 = 3;
const STREAM_SAMPLE: u64 = 4;
const STREAM_TRIALS: u64 = 5;
const STREAM_HASH: u64 = 6;
const STREAM_KMEANS: u64 = 7;
const STREAM_SYNTH: u64 = 8;

pub struct Outcome {
    pub metrics: Map<String, Value>,
    pub artifacts: Vec<PathBuf>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    root: RandomSource,
    artifacts: Vec<PathBuf>,
    metrics: Map<String, Value>,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.artifacts.push(p.clone());
        p
    }

    fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.into(), value.into());
    }

    fn stream(&self, k: u64) -> RandomSource {
        self.root.child(k)
    }

    fn data(&self) -> Result<LabeledDataset, CliError> {
        let path = self
            .cfg
            .data
            .path
            .as_deref()
            .ok_or_else(|| CliError::Config("`data.path` is required for this command".into()))?;
        let data = io::ingest(path, self.cfg.data_format()?).in_module("ingest")?;
        log::info!(
            "loaded {} rows of dimension {} from {}",
            data.len(),
            data.dim(),
            path.display()
        );
        if self.cfg.data.standardize {
            Ok(standardize(&data, &data).in_module("ingest")?.0)
        } else {
            Ok(data)
        }
    }

    /// Trained particles when `particles_path` is set, else a Gaussian.
    fn measure(&self) -> Result<ParticleEnsemble, CliError> {
        match &self.cfg.particles_path {
            Some(p) => io::read_particles(p, self.cfg.support_interval()?).in_module("measure-core"),
            None => ParticleEnsemble::gaussian(self.cfg.gaussian_xi).in_module("measure-core"),
        }
    }
}

pub fn run(command: &Command, cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Data {
        module: "cli",
        cause: format!("cannot create {}: {e}", out.display()),
    })?;
    let mut ctx = Ctx {
        cfg,
        out,
        root: RandomSource::new(cfg.seed),
        artifacts: Vec::new(),
        metrics: Map::new(),
    };
    match command {
        Command::TrainKernel => train_kernel(&mut ctx)?,
        Command::Features => features(&mut ctx)?,
        Command::LshBuild => lsh_build(&mut ctx)?,
        Command::LshQuery => lsh_query(&mut ctx)?,
        Command::MmdTest => mmd(&mut ctx)?,
        Command::PdeSimulate => pde(&mut ctx)?,
        Command::Svm => svm(&mut ctx)?,
        Command::KmeansLabel => kmeans(&mut ctx)?,
        Command::SynthData { .. } => synth(&mut ctx)?,
    }
    Ok(Outcome {
        metrics: ctx.metrics,
        artifacts: ctx.artifacts,
    })
}

fn train_kernel(ctx: &mut Ctx) -> Result<(), CliError> {
    let data = ctx.data()?;
    let lcfg = ctx.cfg.langevin_config()?;
    let mut rng = ctx.stream(STREAM_REFERENCE);
    let reference = ParticleEnsemble::uniform(ctx.cfg.particles, ctx.cfg.support_interval()?, &mut rng)
        .in_module("measure-core")?;
    let result = train(&lcfg, &data, &reference).in_module("langevin-optimizer")?;
    log::info!(
        "trained {} particles: multiplier {:.3e}, constraint {:.3e}",
        result.ensemble.len(),
        result.multiplier,
        result.constraint_value
    );

    io::write_particles(&ctx.path("particles.csv"), &result.ensemble).in_module("cli")?;
    let trials = result.trials.iter().enumerate().map(|(i, t)| {
        vec![
            i.to_string(),
            t.multiplier.to_string(),
            t.constraint.to_string(),
            t.feasible.to_string(),
        ]
    });
    io::write_table(
        &ctx.path("trials.csv"),
        &["trial", "multiplier", "constraint", "feasible"],
        trials,
    )
    .in_module("cli")?;
    if !result.trajectory.is_empty() {
        let rows = result.trajectory.iter().flat_map(|(step, e)| {
            e.particles()
                .iter()
                .enumerate()
                .map(move |(i, v)| vec![step.to_string(), i.to_string(), v.to_string()])
        });
        io::write_table(&ctx.path("trajectory.csv"), &["step", "index", "value"], rows).in_module("cli")?;
    }

    let k = KernelUnderMeasure::new(result.ensemble.clone());
    let after = alignment(&k, &data).in_module("alignment-objective")?;
    let before = alignment(&KernelUnderMeasure::new(reference), &data).in_module("alignment-objective")?;
    ctx.metric("multiplier", result.multiplier);
    ctx.metric("last_trial_multiplier", result.last_trial_multiplier);
    ctx.metric("bracket", json!([result.bracket.0, result.bracket.1]));
    ctx.metric("constraint_value", result.constraint_value);
    ctx.metric("constraint_active", result.constraint_active);
    ctx.metric("trials", result.trials.len());
    ctx.metric("alignment_reference", before);
    ctx.metric("alignment_trained", after);
    ctx.metric("particle_mean", result.ensemble.mean());
    Ok(())
}

fn features(ctx: &mut Ctx) -> Result<(), CliError> {
    let data = ctx.data()?;
    let measure = ctx.measure()?;
    let bank = draw_features(
        &measure,
        ctx.cfg.features.count,
        data.dim(),
        &mut ctx.stream(STREAM_FEATURES),
    )
    .in_module("random-features")?;
    io::save_feature_bank(&ctx.path("feature_bank.csv"), &bank).in_module("cli")?;
    let mut header = vec!["label".to_string()];
    header.extend((0..bank.count()).map(|k| format!("phi{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::with_capacity(data.len());
    for (x, y) in data.rows().zip(data.labels()) {
        let phi = feature_map(&bank, x).in_module("random-features")?;
        rows.push(
            std::iter::once(y.to_string())
                .chain(phi.iter().map(f64::to_string))
                .collect(),
        );
    }
    io::write_table(&ctx.path("features.csv"), &header, rows).in_module("cli")?;
    ctx.metric("features", bank.count());
    ctx.metric("dim", bank.dim());
    ctx.metric("rows", data.len());
    Ok(())
}

enum Family {
    Binary(BinaryHashFamily),
    Qary(QaryHashFamily),
}

impl Family {
    fn build(
        cfg: &RunConfig,
        measure: &ParticleEnsemble,
        dim: usize,
        rng: &mut RandomSource,
    ) -> Result<Self, CliError> {
        let lsh = &cfg.lsh;
        if lsh.alphabet == 2 {
            Ok(Family::Binary(
                BinaryHashFamily::draw(measure, lsh.length, dim, rng).in_module("kernel-lsh")?,
            ))
        } else {
            let bank = draw_features(measure, cfg.features.count, dim, rng).in_module("random-features")?;
            Ok(Family::Qary(
                QaryHashFamily::draw(bank, lsh.alphabet, lsh.length, rng).in_module("kernel-lsh")?,
            ))
        }
    }

    fn hash(&self, points: &[&[f64]]) -> Result<Vec<HashCode>, CliError> {
        match self {
            Family::Binary(f) => points
                .iter()
                .map(|x| binary_hash(f, x))
                .collect::<rkl::error::Result<_>>(),
            Family::Qary(f) => f.hash_many(points),
        }
        .in_module("kernel-lsh")
    }
}

fn lsh_build(ctx: &mut Ctx) -> Result<(), CliError> {
    let data = ctx.data()?;
    let measure = ctx.measure()?;
    let family = Family::build(ctx.cfg, &measure, data.dim(), &mut ctx.stream(STREAM_HASH))?;
    let rows: Vec<&[f64]> = data.rows().collect();
    let codes = family.hash(&rows)?;
    let lsh = &ctx.cfg.lsh;
    let (length, alphabet, seed) = (lsh.length, lsh.alphabet, ctx.cfg.seed);
    io::save_codes(&ctx.path("codes.bin"), &codes, length, alphabet, seed).in_module("cli")?;
    let distinct: HashSet<&[u32]> = codes.iter().map(HashCode::symbols).collect();
    ctx.metric("codes", codes.len());
    ctx.metric("length", length);
    ctx.metric("alphabet", alphabet);
    ctx.metric("distinct_codes", distinct.len());
    Ok(())
}

fn lsh_query(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let database = ctx.data()?;
    let path = cfg
        .lsh
        .codes_path
        .as_deref()
        .ok_or_else(|| CliError::Config("`lsh.codes_path` is required for lsh-query".into()))?;
    let stored = io::load_codes(path).in_module("kernel-lsh")?;
    if stored.length != cfg.lsh.length || stored.alphabet != cfg.lsh.alphabet || stored.seed != cfg.seed {
        return Err(CliError::Config(format!(
            "codes in {} were built with length {}, alphabet {}, seed {}; the configuration says {}, {}, {}",
            path.display(),
            stored.length,
            stored.alphabet,
            stored.seed,
            cfg.lsh.length,
            cfg.lsh.alphabet,
            cfg.seed
        )));
    }
    if stored.codes.len() != database.len() {
        return Err(CliError::Data {
            module: "kernel-lsh",
            cause: format!("{} codes for {} database rows", stored.codes.len(), database.len()),
        });
    }
    // The family is a function of (config, seed), so rebuilding it reproduces the stored hashes.
    let measure = ctx.measure()?;
    let family = Family::build(cfg, &measure, database.dim(), &mut ctx.stream(STREAM_HASH))?;

    let (queries, self_index): (Vec<Vec<f64>>, bool) = match &cfg.lsh.query_path {
        Some(p) => {
            let q = io::ingest(p, cfg.data_format()?).in_module("ingest")?;
            (q.rows().map(<[f64]>::to_vec).collect(), false)
        }
        None => (
            database.rows().take(cfg.lsh.queries).map(<[f64]>::to_vec).collect(),
            true,
        ),
    };
    let query_refs: Vec<&[f64]> = queries.iter().map(Vec::as_slice).collect();
    let query_codes = family.hash(&query_refs)?;

    let k = cfg.lsh.neighbors;
    let mut pr_rows = Vec::new();
    let mut neighbor_rows = Vec::new();
    let mut precision_sum = 0.0;
    for (qi, (x, code)) in queries.iter().zip(&query_codes).enumerate() {
        let candidates = (0..database.len()).filter(|&i| !(self_index && i == qi));
        let mut euclid: Vec<(f64, usize)> = candidates
            .clone()
            .map(|i| (squared_distance(database.row(i), x), i))
            .collect();
        euclid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let relevant: HashSet<usize> = euclid.iter().take(k).map(|e| e.1).collect();
        let mut dist: Vec<(usize, u64)> = candidates
            .map(|i| hamming_distance(&stored.codes[i], code).map(|d| (i, d as u64)))
            .collect::<rkl::error::Result<_>>()
            .in_module("kernel-lsh")?;
        for (threshold, p, r) in pr_curve(&dist, &relevant) {
            pr_rows.push(vec![
                qi.to_string(),
                threshold.to_string(),
                p.to_string(),
                r.to_string(),
            ]);
        }
        dist.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
        let top: HashSet<usize> = dist.iter().take(k).map(|d| d.0).collect();
        precision_sum += precision_recall(&top, &relevant).0;
        for (rank, (i, d)) in dist.iter().take(k).enumerate() {
            neighbor_rows.push(vec![qi.to_string(), rank.to_string(), i.to_string(), d.to_string()]);
        }
    }
    io::write_table(
        &ctx.path("pr_curve.csv"),
        &["query", "threshold", "precision", "recall"],
        pr_rows,
    )
    .in_module("cli")?;
    io::write_table(
        &ctx.path("neighbors.csv"),
        &["query", "rank", "index", "distance"],
        neighbor_rows,
    )
    .in_module("cli")?;
    ctx.metric("queries", queries.len());
    ctx.metric("neighbors", k);
    ctx.metric("mean_precision_at_k", precision_sum / queries.len() as f64);
    Ok(())
}

fn mmd(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let measure = ctx.measure()?;
    let s = &cfg.synth;
    let model =
        SyntheticModel::new(s.lambda, s.dim, s.reduced_dim, &mut ctx.stream(STREAM_MODEL)).in_module("mmd-test")?;
    let dim = model.reduced_dim();
    let sample = match &cfg.data.path {
        // A data file supplies the two samples by label: +1 against -1.
        Some(_) => {
            let data = ctx.data()?;
            let (v, w): (Vec<_>, Vec<_>) = data.rows().zip(data.labels()).partition(|(_, y)| **y > 0.0);
            TwoSampleData::new(
                v.into_iter().map(|(x, _)| x.to_vec()).collect(),
                w.into_iter().map(|(x, _)| x.to_vec()).collect(),
            )
            .in_module("mmd-test")?
        }
        None => model
            .sample(cfg.mmd.samples_v, cfg.mmd.samples_w, &mut ctx.stream(STREAM_SAMPLE))
            .in_module("mmd-test")?,
    };
    let bank = draw_features(
        &measure,
        cfg.features.count,
        sample.dim(),
        &mut ctx.stream(STREAM_FEATURES),
    )
    .in_module("random-features")?;
    let outcome = run_test(&sample, &bank, cfg.mmd.tau).in_module("mmd-test")?;
    log::info!("statistic {:.4e}: {:?}", outcome.statistic, outcome.decision);
    ctx.metric("statistic", outcome.statistic);
    ctx.metric("tau", cfg.mmd.tau);
    ctx.metric("decision", format!("{:?}", outcome.decision));

    if sample.dim() == dim {
        let trials = ctx.stream(STREAM_TRIALS);
        let sizes = (cfg.mmd.samples_v, cfg.mmd.samples_w);
        let stats = trial_statistics(&model, sizes, cfg.mmd.trials, &bank, &trials).in_module("mmd-test")?;
        let grid: Vec<f64> = (0..=cfg.mmd.tau_steps)
            .map(|i| cfg.mmd.tau_max * i as f64 / cfg.mmd.tau_steps as f64)
            .collect();
        let curve = power_curve(&stats, &grid);
        let at_tau = power_curve(&stats, &[cfg.mmd.tau])[0].1;
        io::write_table(
            &ctx.path("statistics.csv"),
            &["trial", "statistic"],
            stats
                .iter()
                .enumerate()
                .map(|(i, s)| vec![i.to_string(), s.to_string()]),
        )
        .in_module("cli")?;
        io::write_table(
            &ctx.path("power_curve.csv"),
            &["tau", "power"],
            curve.iter().map(|(t, p)| vec![t.to_string(), p.to_string()]),
        )
        .in_module("cli")?;
        ctx.metric("power_at_tau", at_tau);
        // Non-finite values serialize as null.
        ctx.metric("largest_full_power_tau", largest_full_power_tau(&curve));
    } else {
        log::info!(
            "data dimension {} differs from the synthetic model; skipping the power curve",
            sample.dim()
        );
    }
    Ok(())
}

fn pde(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let data = ctx.data()?;
    let support = cfg.support_interval()?;
    let p = &cfg.pde;
    let problem = MeanFieldProblem::new(&data, support, p.bins, p.gamma).in_module("meanfield-oracle")?;
    let factor = p.bins / p.histogram_bins;
    let mut horizons = p.horizons.clone();
    horizons.sort_by(f64::total_cmp);
    let mut grid = DensityGrid::uniform(p.bins, support).in_module("meanfield-oracle")?;
    let mut times = Vec::new();
    for (i, &t) in horizons.iter().enumerate() {
        grid = evolve(&problem, &grid, p.beta, p.max_dt, t).in_module("meanfield-oracle")?;
        let coarse = grid.coarsen(factor).in_module("meanfield-oracle")?;
        io::write_histogram(&ctx.path(&format!("density_{i}.csv")), &coarse).in_module("cli")?;
        log::info!("density at t = {t} written");
        times.push(t);
    }
    ctx.metric("horizons", json!(times));
    ctx.metric("mass", grid.mass());
    if let Some(path) = &cfg.particles_path {
        let ensemble = io::read_particles(path, support).in_module("measure-core")?;
        let coarse = grid.coarsen(factor).in_module("meanfield-oracle")?;
        let (l1, histogram) = compare_particles_to_density(&ensemble, &coarse).in_module("meanfield-oracle")?;
        io::write_histogram(&ctx.path("particle_histogram.csv"), &histogram).in_module("cli")?;
        ctx.metric("particle_l1", l1);
    }
    if p.gibbs {
        let start = DensityGrid::uniform(p.bins, support).in_module("meanfield-oracle")?;
        let g = gibbs_fixed_point_with(&problem, p.beta, &start, 0.5, 100_000, 1e-12).in_module("meanfield-oracle")?;
        if !g.converged {
            return Err(CliError::Numeric {
                module: "meanfield-oracle",
                cause: format!(
                    "Gibbs iteration stopped at residual {:.3e} after {} steps",
                    g.residual, g.iterations
                ),
            });
        }
        let coarse = g.grid.coarsen(factor).in_module("meanfield-oracle")?;
        io::write_histogram(&ctx.path("gibbs.csv"), &coarse).in_module("cli")?;
        let same_time =
            DensityGrid::new(support, g.grid.density().to_vec(), grid.time()).in_module("meanfield-oracle")?;
        ctx.metric("gibbs_iterations", g.iterations);
        ctx.metric(
            "l1_to_gibbs",
            grid.l1_distance(&same_time).in_module("meanfield-oracle")?,
        );
    }
    Ok(())
}

fn svm(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let path = cfg
        .data
        .path
        .as_deref()
        .ok_or_else(|| CliError::Config("`data.path` is required for this command".into()))?;
    let data = io::ingest(path, cfg.data_format()?).in_module("ingest")?;
    let mut rng = RandomSource::new(cfg.seed);
    let (train_set, test_set) = train_test_split(&data, cfg.data.test_fraction, &mut rng).in_module("eval-harness")?;
    let (train_set, test_set) = if cfg.data.standardize {
        standardize(&train_set, &test_set).in_module("eval-harness")?
    } else {
        (train_set, test_set)
    };
    let ccfg = ClassificationConfig {
        support: cfg.support_interval()?,
        particles: cfg.particles,
        langevin: cfg.langevin_config()?,
        features: cfg.features.count,
        svm_lambda: cfg.svm.lambda,
        svm_epochs: cfg.svm.epochs,
        knn_k: cfg.svm.knn_k,
        importance_radius: cfg.svm.importance_radius,
    };
    let mut rows = Vec::new();
    let mut errors = Map::new();
    for method in cfg.svm_methods()? {
        let r = evaluate_method(method, &train_set, &test_set, &ccfg, &rng).in_module("eval-harness")?;
        log::info!(
            "{}: train error {:.4}, test error {:.4}",
            method.name(),
            r.train_error,
            r.test_error
        );
        errors.insert(
            method.name().into(),
            json!({ "train_error": r.train_error, "test_error": r.test_error }),
        );
        rows.push(vec![
            method.name().to_string(),
            r.features.to_string(),
            r.train_error.to_string(),
            r.test_error.to_string(),
            format!("{:.3}", r.seconds),
        ]);
    }
    io::write_table(
        &ctx.path("errors.csv"),
        &["method", "N", "trainErr", "testErr", "seconds"],
        rows,
    )
    .in_module("cli")?;
    ctx.metric("train_rows", train_set.len());
    ctx.metric("test_rows", test_set.len());
    ctx.metric("errors", Value::Object(errors));
    Ok(())
}

fn kmeans(ctx: &mut Ctx) -> Result<(), CliError> {
    let data = ctx.data()?;
    let points: Vec<Vec<f64>> = data.rows().map(<[f64]>::to_vec).collect();
    let k = &ctx.cfg.kmeans;
    let r = kmeans_label(&points, k.k, &mut ctx.stream(STREAM_KMEANS), k.max_iterations).in_module("eval-harness")?;
    let relabeled = LabeledDataset::new(points, r.labels.clone()).in_module("eval-harness")?;
    let file = std::fs::File::create(ctx.path("labeled.csv")).map_err(|e| CliError::from_core("cli", e.into()))?;
    io::write_csv_dataset(std::io::BufWriter::new(file), &relabeled).in_module("cli")?;
    let rows = r
        .assignments
        .iter()
        .zip(&r.labels)
        .enumerate()
        .map(|(i, (c, y))| vec![i.to_string(), c.to_string(), y.to_string()]);
    io::write_table(&ctx.path("assignments.csv"), &["index", "cluster", "label"], rows).in_module("cli")?;
    let positives = r.labels.iter().filter(|y| **y > 0.0).count();
    ctx.metric("clusters", k.k);
    ctx.metric("positive_cluster", r.positive_cluster);
    ctx.metric("positives", positives);
    ctx.metric("wcss", r.wcss());
    ctx.metric("iterations", r.iterations);
    Ok(())
}

fn synth(ctx: &mut Ctx) -> Result<(), CliError> {
    let s = &ctx.cfg.synth;
    let mut rng = ctx.stream(STREAM_SYNTH);
    let model = SyntheticModel::new(s.lambda, s.dim, s.reduced_dim, &mut rng).in_module("mmd-test")?;
    let data = model
        .labeled(s.positives, s.negatives, &mut rng)
        .in_module("mmd-test")?;
    let file = std::fs::File::create(ctx.path("data.csv")).map_err(|e| CliError::from_core("cli", e.into()))?;
    io::write_csv_dataset(std::io::BufWriter::new(file), &data).in_module("cli")?;
    ctx.metric("rows", data.len());
    ctx.metric("dim", data.dim());
    ctx.metric("lambda", s.lambda);
    Ok(())
}
