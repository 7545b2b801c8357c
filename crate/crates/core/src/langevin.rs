//! Projected particle Langevin dynamics and the multiplier search that keeps
//! the ensemble inside a Sinkhorn ball around the reference.

use rand::RngCore;

use crate::dataset::LabeledDataset;
use crate::error::{check_positive, Error, Result};
use crate::measure::{ParticleEnsemble, SupportInterval};
use crate::objective::{self, ObjectiveConfig};
use crate::par;
use crate::rng::RandomSource;
use crate::sinkhorn::{self, SinkhornParams, TransportPlan};

const NOISE_CHUNK: usize = 1024;
pub const DEFAULT_MAX_MULTIPLIER: f64 = 1e12;

/// How the per-pair gradient is scaled inside the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftScaling {
    /// The exact derivative of the surrogate.
    #[default]
    Exact,
    /// Gradient multiplied by `N / 2`, so that with time `t = m * eta` the
    /// particle law follows the mean-field equation independent of `N`.
    MeanField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinConfig {
    pub step_size: f64,
    /// `f64::INFINITY` switches the noise off.
    pub inverse_temperature: f64,
    pub total_steps: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub radius: f64,
    pub bisection_tolerance: f64,
    pub seed: u64,
    pub drift_scaling: DriftScaling,
    /// Use `eta / sqrt(m + 1)` at step `m`.
    pub step_decay: bool,
    /// Keep a snapshot every this many steps of the accepted trial; 0 disables.
    pub snapshot_interval: usize,
    pub sinkhorn_tolerance: f64,
    pub max_multiplier: f64,
}

impl LangevinConfig {
    pub fn new(step_size: f64, inverse_temperature: f64, total_steps: usize) -> Self {
        Self {
            step_size,
            inverse_temperature,
            total_steps,
            gamma: 1.0,
            epsilon: 0.1,
            radius: 1.0,
            bisection_tolerance: 1e-2,
            seed: 0,
            drift_scaling: DriftScaling::Exact,
            step_decay: false,
            snapshot_interval: 0,
            sinkhorn_tolerance: 1e-10,
            max_multiplier: DEFAULT_MAX_MULTIPLIER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "step_size",
                reason: format!("must be finite and >= 0, got {}", self.step_size),
            });
        }
        if !(self.inverse_temperature > 0.0) {
            return Err(Error::InvalidParameter {
                name: "inverse_temperature",
                reason: format!("must be > 0, got {}", self.inverse_temperature),
            });
        }
        if self.total_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "total_steps",
                reason: "must be >= 1".into(),
            });
        }
        check_positive("gamma", self.gamma)?;
        check_positive("epsilon", self.epsilon)?;
        check_positive("radius", self.radius)?;
        check_positive("bisection_tolerance", self.bisection_tolerance)?;
        check_positive("sinkhorn_tolerance", self.sinkhorn_tolerance)?;
        check_positive("max_multiplier", self.max_multiplier)?;
        Ok(())
    }

    fn objective(&self, h: f64) -> ObjectiveConfig {
        ObjectiveConfig {
            sinkhorn_tolerance: self.sinkhorn_tolerance,
            ..ObjectiveConfig::new(self.gamma, h, self.epsilon)
        }
    }

    fn step_at(&self, m: usize) -> f64 {
        if self.step_decay {
            self.step_size / ((m + 1) as f64).sqrt()
        } else {
            self.step_size
        }
    }
}

/// Coordinatewise clamp onto the support box.
pub fn project(candidate: Vec<f64>, support: SupportInterval) -> Result<ParticleEnsemble> {
    ParticleEnsemble::projected(candidate, support)
}

/// Mutable per-trial state: current particles plus the last Sinkhorn plan,
/// reused as a warm start.
struct Walker<'a> {
    cfg: &'a LangevinConfig,
    data: &'a LabeledDataset,
    reference: &'a [f64],
    support: SupportInterval,
    h: f64,
    particles: Vec<f64>,
    plan: Option<TransportPlan>,
}

impl Walker<'_> {
    fn step(&mut self, m: usize, rng: &mut RandomSource) -> Result<()> {
        let pair = self.data.sample_pair(rng)?;
        let noise_key = rng.next_u64();
        let objective = self.cfg.objective(self.h);
        let (mut grad, plan) = objective::stochastic_gradient_warm(
            &self.particles,
            &pair,
            &objective,
            self.reference,
            self.plan.as_ref(),
        )?;
        if plan.is_some() {
            self.plan = plan;
        }
        if self.cfg.drift_scaling == DriftScaling::MeanField {
            let s = self.particles.len() as f64 / 2.0;
            grad.iter_mut().for_each(|g| *g *= s);
        }
        let eta = self.cfg.step_at(m);
        let sigma = (2.0 * eta / self.cfg.inverse_temperature).sqrt();
        let support = self.support;
        let noise_root = RandomSource::new(noise_key);
        let grad = &grad;
        par::for_each_chunk_mut(&mut self.particles, NOISE_CHUNK, |c, chunk| {
            let mut local = noise_root.child(c as u64);
            let offset = c * NOISE_CHUNK;
            for (i, p) in chunk.iter_mut().enumerate() {
                let z = local.normal();
                let moved = *p - eta * grad[offset + i] + if sigma > 0.0 { sigma * z } else { 0.0 };
                *p = support.clamp(moved);
            }
        });
        Ok(())
    }
}

/// One projected Langevin update with multiplier `h`: draw a pair, draw the
/// noise, step and clamp.
pub fn langevin_step(
    ensemble: &ParticleEnsemble,
    h: f64,
    cfg: &LangevinConfig,
    data: &LabeledDataset,
    reference: &ParticleEnsemble,
    rng: &mut RandomSource,
) -> Result<ParticleEnsemble> {
    cfg.validate()?;
    let mut walker = Walker {
        cfg,
        data,
        reference: reference.particles(),
        support: ensemble.support(),
        h,
        particles: ensemble.particles().to_vec(),
        plan: None,
    };
    walker.step(0, rng)?;
    Ok(ensemble.with_particles(walker.particles))
}

/// Outcome of running the full step budget at one multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub multiplier: f64,
    /// Sinkhorn distance `sqrt(W^2)` to the reference after the trial.
    pub constraint: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub ensemble: ParticleEnsemble,
    /// Multiplier of the returned ensemble (`h_u`).
    pub multiplier: f64,
    /// Last positive multiplier tried (`h_s`); the `h = 0` probe does not
    /// count, so an inactive constraint reports the phase-1 exit value 1.
    pub last_trial_multiplier: f64,
    pub bracket: (f64, f64),
    /// `sqrt` of the sharp divergence between `ensemble` and the reference.
    pub constraint_value: f64,
    /// False when the ball constraint holds without any penalty (`h = 0`).
    pub constraint_active: bool,
    pub trials: Vec<TrialRecord>,
    /// `(step, ensemble)` snapshots of the returned trial.
    pub trajectory: Vec<(usize, ParticleEnsemble)>,
}

impl TrainResult {
    pub fn bracket_width(&self) -> f64 {
        self.bracket.1 - self.bracket.0
    }
}

struct TrialRun {
    particles: Vec<f64>,
    constraint: f64,
    trajectory: Vec<(usize, ParticleEnsemble)>,
}

fn constraint_distance(particles: &[f64], reference: &[f64], cfg: &LangevinConfig) -> Result<f64> {
    let params = SinkhornParams::new(cfg.epsilon)
        .with_tolerance(cfg.sinkhorn_tolerance)
        .with_max_iterations(sinkhorn::DEFAULT_MAX_ITERATIONS);
    let d = sinkhorn::sinkhorn_divergence_points(particles, reference, params, None)?;
    if !d.plan.converged() {
        return Err(Error::NotConverged {
            iterations: d.plan.iterations(),
            residual: d.plan.residual(),
        });
    }
    Ok(d.value.sqrt())
}

/// Run `total_steps` updates at multiplier `h` starting from `start`.
/// Step `m` always uses substream `m` of the seed, so trials at different
/// multipliers see the same pairs and noise.
pub fn run_trial(
    start: &ParticleEnsemble,
    h: f64,
    cfg: &LangevinConfig,
    data: &LabeledDataset,
    reference: &ParticleEnsemble,
) -> Result<(ParticleEnsemble, Vec<(usize, ParticleEnsemble)>)> {
    cfg.validate()?;
    let run = trial(start, h, cfg, data, reference.particles(), false)?;
    Ok((start.with_particles(run.particles), run.trajectory))
}

fn trial(
    start: &ParticleEnsemble,
    h: f64,
    cfg: &LangevinConfig,
    data: &LabeledDataset,
    reference: &[f64],
    evaluate: bool,
) -> Result<TrialRun> {
    let root = RandomSource::new(cfg.seed);
    let mut walker = Walker {
        cfg,
        data,
        reference,
        support: start.support(),
        h,
        particles: start.particles().to_vec(),
        plan: None,
    };
    let mut trajectory = Vec::new();
    if cfg.snapshot_interval > 0 {
        trajectory.push((0, start.clone()));
    }
    for m in 0..cfg.total_steps {
        let mut rng = root.child(m as u64);
        walker.step(m, &mut rng)?;
        if cfg.snapshot_interval > 0 && (m + 1) % cfg.snapshot_interval == 0 {
            trajectory.push((m + 1, start.with_particles(walker.particles.clone())));
        }
    }
    let constraint = if evaluate {
        constraint_distance(&walker.particles, reference, cfg)?
    } else {
        f64::NAN
    };
    Ok(TrialRun {
        particles: walker.particles,
        constraint,
        trajectory,
    })
}

/// Doubling then bisection on the multiplier `h` until the trained ensemble
/// sits inside the ball `sqrt(W^2) <= radius` with a tight bracket.
///
/// Particles start at the reference. Doubling trials restart from the
/// reference; bisection trials restart from the ensemble accepted at the end
/// of doubling. If the very first trial is feasible a trial at `h = 0` is
/// run; when that is feasible too the constraint is inactive and the
/// unpenalized ensemble is returned with bracket `(0, 0)`.
pub fn train(cfg: &LangevinConfig, data: &LabeledDataset, reference: &ParticleEnsemble) -> Result<TrainResult> {
    cfg.validate()?;
    data.require_pairs()?;
    let zeta = reference.particles();
    let feasible = |c: f64| c <= cfg.radius;
    let mut trials = Vec::new();

    let mut h_s = 1.0;
    let h_l = 0.0;
    let accepted = loop {
        let run = trial(reference, h_s, cfg, data, zeta, true)?;
        let ok = feasible(run.constraint);
        log::debug!(
            "doubling: h = {h_s:.4e}, distance = {:.4e}, feasible = {ok}",
            run.constraint
        );
        trials.push(TrialRecord {
            multiplier: h_s,
            constraint: run.constraint,
            feasible: ok,
        });
        if ok {
            break run;
        }
        h_s *= 2.0;
        if h_s > cfg.max_multiplier {
            return Err(Error::InfeasibleRadius {
                radius: cfg.radius,
                cap: cfg.max_multiplier,
            });
        }
    };
    let mut h_u = h_s;

    if trials.len() == 1 {
        let free = trial(reference, 0.0, cfg, data, zeta, true)?;
        let ok = feasible(free.constraint);
        trials.push(TrialRecord {
            multiplier: 0.0,
            constraint: free.constraint,
            feasible: ok,
        });
        if ok {
            return Ok(TrainResult {
                ensemble: reference.with_particles(free.particles),
                multiplier: 0.0,
                last_trial_multiplier: h_s,
                bracket: (0.0, 0.0),
                constraint_value: free.constraint,
                constraint_active: false,
                trials,
                trajectory: free.trajectory,
            });
        }
    }

    let entry = reference.with_particles(accepted.particles.clone());
    let mut best = accepted;
    let mut h_l = h_l;
    let floor = h_u * f64::EPSILON;
    while h_u - h_l >= cfg.bisection_tolerance * h_s && h_u > floor {
        h_s = 0.5 * (h_u + h_l);
        let run = trial(&entry, h_s, cfg, data, zeta, true)?;
        let ok = feasible(run.constraint);
        log::debug!(
            "bisection: h = {h_s:.4e}, distance = {:.4e}, feasible = {ok}",
            run.constraint
        );
        trials.push(TrialRecord {
            multiplier: h_s,
            constraint: run.constraint,
            feasible: ok,
        });
        if ok {
            h_u = h_s;
            best = run;
        } else {
            h_l = h_s;
        }
    }

    Ok(TrainResult {
        ensemble: reference.with_particles(best.particles),
        multiplier: h_u,
        last_trial_multiplier: h_s,
        bracket: (h_l, h_u),
        constraint_value: best.constraint,
        constraint_active: true,
        trials,
        trajectory: best.trajectory,
    })
}
