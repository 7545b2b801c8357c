//! Entropic optimal transport between two scalar particle ensembles.
//!
//! Scalings are kept in the log domain as dual potentials `f` (rows, source)
//! and `g` (columns, reference), with
//! `plan[i][j] = exp((f[i] + g[j] - cost[i][j]) / epsilon)`, so small
//! `epsilon` never underflows the Gibbs kernel. Rows are source particles and
//! columns are reference particles; both marginals are uniform `1/N`.
//!
//! The divergence reported is the *sharp* one: the transport cost of the
//! entropic plan, without the entropy term.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measure::ParticleEnsemble;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;
/// Residual a plan must reach before it can be differentiated.
pub const GRADIENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl SinkhornParams {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    fn validate(&self) -> Result<()> {
        crate::error::check_positive("epsilon", self.epsilon)?;
        crate::error::check_positive("tolerance", self.tolerance)?;
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Squared-distance cost between source (rows) and reference (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(source: &[f64], reference: &[f64]) -> Result<Self> {
        if source.len() != reference.len() {
            return Err(Error::DimensionMismatch {
                expected: source.len(),
                got: reference.len(),
            });
        }
        let n = source.len();
        let mut entries = Vec::with_capacity(n * n);
        for &x in source {
            for &y in reference {
                entries.push((x - y) * (x - y));
            }
        }
        Ok(Self { n, entries })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    n: usize,
    plan: Vec<f64>,
    log_v: Vec<f64>,
    log_u: Vec<f64>,
    epsilon: f64,
    iterations: usize,
    residual: f64,
    converged: bool,
}

impl TransportPlan {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.plan
    }

    /// Row scaling in log form: `ln v_i = f_i / epsilon`.
    pub fn log_scaling_v(&self) -> &[f64] {
        &self.log_v
    }

    /// Column scaling in log form: `ln u_j = g_j / epsilon`.
    pub fn log_scaling_u(&self) -> &[f64] {
        &self.log_u
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Sup-norm marginal violation.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.plan.chunks_exact(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for row in self.plan.chunks_exact(self.n) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// `sum_ij plan_ij * cost_ij`.
    pub fn transport_cost(&self, cost: &CostMatrix) -> f64 {
        self.plan.iter().zip(&cost.entries).map(|(p, c)| p * c).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceResult {
    pub value: f64,
    pub plan: TransportPlan,
}

const STALL_WINDOW: usize = 64;
const NEWTON_MAX_SIZE: usize = 1500;
const EAGER_NEWTON_SIZE: usize = 256;
const EAGER_NEWTON_RESIDUAL: f64 = 0.5;
const NEWTON_ATTEMPTS: usize = 8;

fn update_columns(cost: &CostMatrix, eps: f64, f: &[f64], g: &mut [f64]) {
    let n = cost.n;
    let log_mass = -(n as f64).ln();
    for (j, gj) in g.iter_mut().enumerate() {
        let lse = log_sum_exp((0..n).map(|i| (f[i] - cost.get(i, j)) / eps));
        *gj = eps * (log_mass - lse);
    }
}

fn dense_plan(cost: &CostMatrix, eps: f64, f: &[f64], g: &[f64]) -> Vec<f64> {
    let n = cost.n;
    let mut plan = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            plan.push(exp_or_zero((f[i] + g[j] - cost.get(i, j)) / eps));
        }
    }
    plan
}

fn row_residual(plan: &[f64], n: usize) -> (Vec<f64>, f64) {
    let target = 1.0 / n as f64;
    let rows: Vec<f64> = plan.chunks_exact(n).map(|r| r.iter().sum()).collect();
    let res = rows.iter().map(|r| (r - target).abs()).fold(0.0, f64::max);
    (rows, res)
}

/// `diag(r) - P diag(1/c) P^T + shift * 1 1^T`.
fn reduced_system(plan: &[f64], n: usize, rows: &[f64], cols: &[f64], shift: f64) -> DMatrix<f64> {
    let inv_sqrt: Vec<f64> = cols.iter().map(|c| 1.0 / c.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| plan[i * n + j] * inv_sqrt[j]);
    let mut m = -(&scaled * scaled.transpose());
    m.add_scalar_mut(shift);
    for (i, r) in rows.iter().enumerate() {
        m[(i, i)] += r;
    }
    m
}

fn solve_symmetric(m: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    match m.clone().cholesky() {
        Some(ch) => Some(ch.solve(rhs)),
        None => m.lu().solve(rhs),
    }
}

/// Newton iterations on the row potentials with columns kept exact. Used when
/// plain scaling contracts too slowly, which happens when the Gibbs kernel is
/// close to a permutation, and to finish small problems. Returns whether the
/// tolerance was reached.
fn newton_polish(
    cost: &CostMatrix,
    params: SinkhornParams,
    f: &mut Vec<f64>,
    g: &mut Vec<f64>,
    iterations: &mut usize,
) -> bool {
    let n = cost.n;
    let eps = params.epsilon;
    let target = 1.0 / n as f64;
    let cols = vec![target; n];
    let mut plan = dense_plan(cost, eps, f, g);
    let (mut rows, mut res) = row_residual(&plan, n);
    while *iterations < params.max_iterations && res > params.tolerance {
        *iterations += 1;
        let m = reduced_system(&plan, n, &rows, &cols, target);
        let rhs = DVector::from_iterator(n, rows.iter().map(|r| -eps * (r - target)));
        let Some(step) = solve_symmetric(m, &rhs) else {
            return false;
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let f_try: Vec<f64> = f.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            let mut g_try = g.clone();
            update_columns(cost, eps, &f_try, &mut g_try);
            let plan_try = dense_plan(cost, eps, &f_try, &g_try);
            let (rows_try, res_try) = row_residual(&plan_try, n);
            if res_try < res {
                *f = f_try;
                *g = g_try;
                plan = plan_try;
                rows = rows_try;
                res = res_try;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return false;
        }
    }
    res <= params.tolerance
}

/// Plain alternating scaling until converged or out of budget. Returns true
/// when it stops early to hand over to Newton: either the residual is small
/// enough for Newton to converge quadratically on a small problem, or the
/// iteration has stalled.
fn scale(
    cost: &CostMatrix,
    params: SinkhornParams,
    f: &mut [f64],
    g: &mut [f64],
    iterations: &mut usize,
    eager: bool,
    allow_handoff: bool,
) -> bool {
    let n = cost.n;
    let eps = params.epsilon;
    let log_mass = -(n as f64).ln();
    let target = 1.0 / n as f64;
    let mut f_next = vec![0.0; n];
    let mut checkpoint = f64::INFINITY;
    let mut since_checkpoint = 0;
    while *iterations < params.max_iterations {
        *iterations += 1;
        since_checkpoint += 1;
        // Columns are exact here; the row update tells us the row error for free.
        let mut residual: f64 = 0.0;
        for i in 0..n {
            let row = cost.row(i);
            let lse = log_sum_exp(g.iter().zip(row).map(|(gj, c)| (gj - c) / eps));
            f_next[i] = eps * (log_mass - lse);
            let row_sum = target * ((f[i] - f_next[i]) / eps).exp();
            residual = residual.max((row_sum - target).abs());
        }
        if residual <= params.tolerance {
            return false;
        }
        let mut stalled = false;
        if since_checkpoint == STALL_WINDOW {
            stalled = residual > 0.5 * checkpoint;
            checkpoint = residual;
            since_checkpoint = 0;
        }
        f.copy_from_slice(&f_next);
        update_columns(cost, eps, f, g);
        if allow_handoff
            && ((eager && n <= EAGER_NEWTON_SIZE && residual < EAGER_NEWTON_RESIDUAL * target)
                || (stalled && n <= NEWTON_MAX_SIZE))
        {
            return true;
        }
    }
    false
}

/// `exp(x)`, skipping the call where the result underflows to zero.
#[inline]
fn exp_or_zero(x: f64) -> f64 {
    if x < -746.0 {
        0.0
    } else {
        x.exp()
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| exp_or_zero(v - max)).sum::<f64>().ln()
}

/// Sinkhorn-Knopp on raw particle positions, optionally warm-started from
/// the dual potentials of an earlier plan of the same size.
pub fn sinkhorn_plan_points(
    source: &[f64],
    reference: &[f64],
    params: SinkhornParams,
    warm_start: Option<&TransportPlan>,
) -> Result<TransportPlan> {
    params.validate()?;
    let cost = CostMatrix::new(source, reference)?;
    let n = cost.n;
    let eps = params.epsilon;
    let target = 1.0 / n as f64;

    let (mut f, mut g) = match warm_start {
        Some(w) if w.n == n => (
            w.log_v.iter().map(|v| v * w.epsilon).collect::<Vec<_>>(),
            w.log_u.iter().map(|u| u * w.epsilon).collect::<Vec<_>>(),
        ),
        _ => (vec![0.0; n], vec![0.0; n]),
    };

    update_columns(&cost, eps, &f, &mut g);
    let mut iterations = 0;
    // A failed Newton attempt falls back to scaling, which hands over again
    // only once it stalls.
    let mut attempts = 0;
    loop {
        let handoff = scale(
            &cost,
            params,
            &mut f,
            &mut g,
            &mut iterations,
            attempts == 0,
            attempts < NEWTON_ATTEMPTS,
        );
        if !handoff {
            break;
        }
        attempts += 1;
        if newton_polish(&cost, params, &mut f, &mut g, &mut iterations) {
            break;
        }
    }

    let plan = dense_plan(&cost, eps, &f, &g);
    let mut out = TransportPlan {
        n,
        plan,
        log_v: f.iter().map(|v| v / eps).collect(),
        log_u: g.iter().map(|u| u / eps).collect(),
        epsilon: eps,
        iterations,
        residual: 0.0,
        converged: false,
    };
    // Report the residual of the stored plan, measured directly.
    out.residual = out
        .row_sums()
        .into_iter()
        .chain(out.column_sums())
        .map(|s| (s - target).abs())
        .fold(0.0, f64::max);
    out.converged = out.residual <= params.tolerance;
    if !out.converged {
        log::debug!(
            "sinkhorn stopped after {iterations} iterations with residual {:.3e}",
            out.residual
        );
    }
    Ok(out)
}

/// Entropic coupling between two ensembles of equal size.
pub fn sinkhorn_plan(
    source: &ParticleEnsemble,
    reference: &ParticleEnsemble,
    epsilon: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<TransportPlan> {
    let params = SinkhornParams::new(epsilon)
        .with_tolerance(tolerance)
        .with_max_iterations(max_iterations);
    sinkhorn_plan_points(source.particles(), reference.particles(), params, None)
}

pub fn sinkhorn_divergence_points(
    source: &[f64],
    reference: &[f64],
    params: SinkhornParams,
    warm_start: Option<&TransportPlan>,
) -> Result<DivergenceResult> {
    let plan = sinkhorn_plan_points(source, reference, params, warm_start)?;
    let cost = CostMatrix::new(source, reference)?;
    Ok(DivergenceResult {
        value: plan.transport_cost(&cost).max(0.0),
        plan,
    })
}

/// Sharp Sinkhorn divergence `sum_ij plan_ij |xi_i - zeta_j|^2`.
pub fn sinkhorn_divergence(
    source: &ParticleEnsemble,
    reference: &ParticleEnsemble,
    epsilon: f64,
    tolerance: f64,
) -> Result<DivergenceResult> {
    let params = SinkhornParams::new(epsilon).with_tolerance(tolerance);
    sinkhorn_divergence_points(source.particles(), reference.particles(), params, None)
}

/// Gradient of the sharp divergence with respect to each source particle.
///
/// The plan depends on the particles through the marginal constraints, so the
/// derivative is taken through them: with `P` the plan, `C` the cost, and
/// `(lambda, mu)` solving
///
/// ```text
/// [ diag(P 1)   P        ] [lambda]   [ (P o C) 1   ]
/// [ P^T         diag(P^T 1)] [mu    ] = [ (P o C)^T 1 ]
/// ```
///
/// the gradient is
/// `g_k = sum_j P_kj 2(x_k - y_j) (1 + (lambda_k + mu_j - C_kj) / eps)`.
/// The system is singular along `(1, -1)`; that direction does not affect
/// `lambda_k + mu_j` and is removed with a rank-one shift.
pub fn sinkhorn_gradient_points(source: &[f64], reference: &[f64], plan: &TransportPlan) -> Result<Vec<f64>> {
    let n = plan.n;
    if source.len() != n || reference.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: source.len().max(reference.len()),
        });
    }
    if !(plan.residual <= GRADIENT_TOLERANCE) {
        return Err(Error::StalePlan {
            residual: plan.residual,
            required: GRADIENT_TOLERANCE,
        });
    }
    if n == 1 {
        return Ok(vec![2.0 * (source[0] - reference[0])]);
    }
    let cost = CostMatrix::new(source, reference)?;
    let eps = plan.epsilon;
    let row_sums = plan.row_sums();
    let col_sums = plan.column_sums();
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let pc = plan.get(i, j) * cost.get(i, j);
            alpha[i] += pc;
            beta[j] += pc;
        }
    }

    // Schur complement on the row block.
    let shift = 1.0 / n as f64;
    let rhs = DVector::from_iterator(
        n,
        (0..n).map(|i| alpha[i] - (0..n).map(|j| plan.get(i, j) * beta[j] / col_sums[j]).sum::<f64>()),
    );
    let schur = reduced_system(&plan.plan, n, &row_sums, &col_sums, shift);
    let lambda = solve_symmetric(schur, &rhs).ok_or(Error::NotConverged {
        iterations: plan.iterations,
        residual: plan.residual,
    })?;
    let mu: Vec<f64> = (0..n)
        .map(|j| {
            let pl: f64 = (0..n).map(|i| plan.get(i, j) * lambda[i]).sum();
            (beta[j] - pl) / col_sums[j]
        })
        .collect();

    Ok((0..n)
        .map(|k| {
            (0..n)
                .map(|j| {
                    let c = cost.get(k, j);
                    plan.get(k, j) * 2.0 * (source[k] - reference[j]) * (1.0 + (lambda[k] + mu[j] - c) / eps)
                })
                .sum()
        })
        .collect())
}

pub fn sinkhorn_gradient(
    source: &ParticleEnsemble,
    reference: &ParticleEnsemble,
    plan: &TransportPlan,
) -> Result<Vec<f64>> {
    sinkhorn_gradient_points(source.particles(), reference.particles(), plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::SupportInterval;
    use crate::rng::RandomSource;
    use proptest::prelude::*;

    fn ens(xs: &[f64]) -> ParticleEnsemble {
        ParticleEnsemble::new(xs.to_vec(), SupportInterval::new(0.0, 100.0).unwrap()).unwrap()
    }

    /// Naive (non-log) Sinkhorn with a fixed iteration count.
    fn naive_plan(x: &[f64], y: &[f64], eps: f64, iters: usize) -> Vec<f64> {
        let n = x.len();
        let k: Vec<f64> = x
            .iter()
            .flat_map(|a| y.iter().map(move |b| (-(a - b) * (a - b) / eps).exp()))
            .collect();
        let mut u = vec![1.0; n];
        let mut v = vec![1.0; n];
        for _ in 0..iters {
            for i in 0..n {
                let s: f64 = (0..n).map(|j| k[i * n + j] * u[j]).sum();
                v[i] = 1.0 / (n as f64 * s);
            }
            for j in 0..n {
                let s: f64 = (0..n).map(|i| k[i * n + j] * v[i]).sum();
                u[j] = 1.0 / (n as f64 * s);
            }
        }
        (0..n * n).map(|ij| v[ij / n] * k[ij] * u[ij % n]).collect()
    }

    /// Exact squared 2-Wasserstein by enumerating permutations.
    fn lp_oracle(x: &[f64], y: &[f64]) -> f64 {
        fn perms(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
            if k == items.len() {
                out.push(items.clone());
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                perms(items, k + 1, out);
                items.swap(k, i);
            }
        }
        let mut all = Vec::new();
        perms(&mut (0..x.len()).collect(), 0, &mut all);
        all.iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| (x[i] - y[j]).powi(2)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            / x.len() as f64
    }

    #[test]
    fn single_particle_plan_is_forced() {
        let plan = sinkhorn_plan(&ens(&[2.0]), &ens(&[5.0]), 0.1, 1e-12, 100).unwrap();
        assert!((plan.get(0, 0) - 1.0).abs() < 1e-12);
        let div = sinkhorn_divergence(&ens(&[2.0]), &ens(&[5.0]), 0.1, 1e-12).unwrap();
        assert!((div.value - 9.0).abs() < 1e-12);
        let g = sinkhorn_gradient(&ens(&[2.0]), &ens(&[5.0]), &div.plan).unwrap();
        assert_eq!(g, vec![-6.0]);
    }

    #[test]
    fn identical_pair_plan_is_half_identity() {
        let plan = sinkhorn_plan(&ens(&[0.0, 1.0]), &ens(&[0.0, 1.0]), 0.01, 1e-12, 10_000).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 0.5 } else { 0.0 };
                assert!((plan.get(i, j) - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn matches_naive_iteration() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.5, 1.5, 2.5];
        let plan = sinkhorn_plan(&ens(&x), &ens(&y), 0.3, 1e-14, 100_000).unwrap();
        let oracle = naive_plan(&x, &y, 0.3, 100_000);
        for (a, b) in plan.entries().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn two_by_two_closed_form_in_the_slow_regime() {
        // Uniform 2x2 plans are [[a, 1/2 - a], [1/2 - a, a]] with
        // a / (1/2 - a) = exp(-delta / (2 eps)).
        let x = [1.3293099593396815, 0.0];
        let y = [0.3, 2.5598269308774586];
        let eps = 0.05;
        let c = CostMatrix::new(&x, &y).unwrap();
        let delta = c.get(0, 0) + c.get(1, 1) - c.get(0, 1) - c.get(1, 0);
        let (e, flip) = if delta > 0.0 {
            ((-delta / (2.0 * eps)).exp(), false)
        } else {
            ((delta / (2.0 * eps)).exp(), true)
        };
        let small = e / (2.0 * (1.0 + e));
        let p = SinkhornParams::new(eps)
            .with_tolerance(1e-14)
            .with_max_iterations(100_000);
        let plan = sinkhorn_plan_points(&x, &y, p, None).unwrap();
        assert!(plan.converged());
        let diag = if flip { 0.5 - small } else { small };
        assert!((plan.get(0, 0) - diag).abs() < 1e-13);
        assert!((plan.get(0, 1) - (0.5 - diag)).abs() < 1e-13);
    }

    #[test]
    fn divergence_examples() {
        let d = sinkhorn_divergence(&ens(&[0.0, 1.0]), &ens(&[0.0, 1.0]), 0.005, 1e-12).unwrap();
        assert!(d.value <= 1e-4);
        let d = sinkhorn_divergence(&ens(&[0.0, 2.0]), &ens(&[1.0, 3.0]), 0.01, 1e-12).unwrap();
        assert!((d.value - 1.0).abs() <= 2e-3);
        assert!((lp_oracle(&[0.0, 2.0], &[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_sizes_rejected() {
        assert!(matches!(
            sinkhorn_plan(&ens(&[0.0, 1.0]), &ens(&[0.0]), 0.1, 1e-9, 10),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_convergence_is_flagged_not_fatal() {
        let plan = sinkhorn_plan(&ens(&[0.0, 1.0, 5.0]), &ens(&[3.0, 0.2, 4.0]), 0.01, 1e-15, 1).unwrap();
        assert_eq!(plan.iterations(), 1);
        assert!(!plan.converged());
        assert!(plan.entries().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn tiny_epsilon_stays_finite() {
        let plan = sinkhorn_plan(&ens(&[0.0, 10.0, 50.0]), &ens(&[40.0, 1.0, 9.0]), 1e-4, 1e-9, 10_000).unwrap();
        assert!(plan.entries().iter().all(|p| p.is_finite() && *p >= 0.0));
        assert!(plan.converged());
    }

    #[test]
    fn stale_plan_rejected_by_gradient() {
        let x = ens(&[0.0, 1.0, 5.0]);
        let y = ens(&[3.0, 0.2, 4.0]);
        let plan = sinkhorn_plan(&x, &y, 0.01, 1e-15, 1).unwrap();
        assert!(matches!(sinkhorn_gradient(&x, &y, &plan), Err(Error::StalePlan { .. })));
    }

    #[test]
    fn symmetric_configuration_gives_antisymmetric_gradient() {
        let x = ens(&[9.0, 11.0]);
        let d = sinkhorn_divergence(&x, &x, 0.5, 1e-13).unwrap();
        let g = sinkhorn_gradient(&x, &x, &d.plan).unwrap();
        assert!((g[0] + g[1]).abs() < 1e-10, "{g:?}");
    }

    fn finite_difference(x: &[f64], y: &[f64], eps: f64, k: usize, h: f64) -> f64 {
        let params = SinkhornParams::new(eps)
            .with_tolerance(1e-11)
            .with_max_iterations(1_000_000);
        let mut xp = x.to_vec();
        xp[k] += h;
        let mut xm = x.to_vec();
        xm[k] -= h;
        let fp = sinkhorn_divergence_points(&xp, y, params, None).unwrap().value;
        let fm = sinkhorn_divergence_points(&xm, y, params, None).unwrap().value;
        (fp - fm) / (2.0 * h)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RandomSource::new(42);
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform(0.0, 1.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.uniform(0.0, 1.0)).collect();
            let params = SinkhornParams::new(0.05)
                .with_tolerance(1e-13)
                .with_max_iterations(1_000_000);
            let d = sinkhorn_divergence_points(&x, &y, params, None).unwrap();
            let g = sinkhorn_gradient_points(&x, &y, &d.plan).unwrap();
            for k in 0..4 {
                let fd = finite_difference(&x, &y, 0.05, k, 1e-5);
                let err = (g[k] - fd).abs() / fd.abs().max(1e-9);
                assert!(err <= 1e-4, "component {k}: {} vs {fd}", g[k]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn symmetric_and_shift_invariant(
            xs in proptest::collection::vec(0.0f64..3.0, 1..6),
            shift in -1.0f64..1.0,
            eps in 0.05f64..1.0,
        ) {
            let n = xs.len();
            let ys: Vec<f64> = xs.iter().rev().map(|v| (v * 1.7 + 0.3) % 3.0).collect();
            let p = SinkhornParams::new(eps).with_tolerance(1e-13).with_max_iterations(100_000);
            let ab = sinkhorn_divergence_points(&xs, &ys, p, None).unwrap();
            let ba = sinkhorn_divergence_points(&ys, &xs, p, None).unwrap();
            prop_assert!((ab.value - ba.value).abs() <= 1e-10 * (1.0 + ab.value));
            let xs2: Vec<f64> = xs.iter().map(|v| v + shift).collect();
            let ys2: Vec<f64> = ys.iter().map(|v| v + shift).collect();
            let moved = sinkhorn_divergence_points(&xs2, &ys2, p, None).unwrap();
            prop_assert!((ab.value - moved.value).abs() <= 1e-10 * (1.0 + ab.value));
            // Marginal feasibility and the stored-plan identity.
            let target = 1.0 / n as f64;
            for s in ab.plan.row_sums().into_iter().chain(ab.plan.column_sums()) {
                prop_assert!((s - target).abs() <= ab.plan.residual() + 1e-15);
            }
            let cost = CostMatrix::new(&xs, &ys).unwrap();
            let recomputed = ab.plan.transport_cost(&cost);
            prop_assert!((recomputed - ab.value).abs() <= 1e-10 * recomputed.abs().max(1e-300));
        }

        #[test]
        fn small_epsilon_is_close_to_exact_transport(
            xs in proptest::collection::vec(0.0f64..1.0, 2..6),
            spread in 1.0f64..4.0,
        ) {
            // Scaled so that every adjacent gap is large relative to epsilon.
            let xs: Vec<f64> = xs.iter().enumerate().map(|(i, v)| i as f64 * spread + v).collect();
            let ys: Vec<f64> = xs.iter().rev().map(|v| v * 0.9 + 0.5).collect();
            let p = SinkhornParams::new(0.005).with_tolerance(1e-12).with_max_iterations(200_000);
            let d = sinkhorn_divergence_points(&xs, &ys, p, None).unwrap();
            let lp = lp_oracle(&xs, &ys);
            prop_assert!((d.value - lp).abs() <= 1e-3 * (1.0 + lp));
        }
    }
}
