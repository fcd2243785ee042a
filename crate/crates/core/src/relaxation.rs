//! Multiple relaxation of a Runge-Kutta step.
//!
//! Given the baseline update `u^{n+1}` and directions `d_1..d_ℓ`, find `γ`
//! with `G(u^{n+1} + Δt Σ γ_i d_i) = G(u^n)`. The relaxed state approximates
//! the solution at `t_n + (1 + Σγ_i) Δt`.
//!
//! Newton's method from `γ = 0` is tried first. Rank-deficient Jacobians get a
//! minimum-norm step. If Newton stalls, a grid search followed by a
//! Nelder-Mead simplex minimises `‖R(γ)‖²`, and the better of the two answers
//! is returned.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::problems::{Invariants, OdeProblem, ProblemError, Selected};
use crate::stepper::{explicit_step, StepError, StepRecord};
use crate::tableaux::EmbeddedSet;

/// Condition number above which the Newton system is treated as singular.
const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Tolerance relative to `1 + ‖G(u^n)‖_∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Grid points per axis of the fallback search.
    pub fallback_grid: usize,
    /// Half-width of the fallback search box.
    pub fallback_half_width: f64,
    /// Accept the best available `γ` when the tolerance cannot be met.
    pub allow_inexact: bool,
    /// Extra Newton steps after convergence, while the residual still falls.
    pub polish_iterations: usize,
    /// Report steps with `‖γ‖_∞` above this bound.
    pub branch_bound: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-13,
            max_iter: 50,
            fallback_grid: 11,
            fallback_half_width: 0.1,
            allow_inexact: false,
            polish_iterations: 2,
            branch_bound: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Newton,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub method: SolveMethod,
    pub converged: bool,
    /// Newton met a (numerically) singular Jacobian at least once.
    pub singular_jacobian: bool,
    pub wrong_branch: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedStep {
    pub gamma: Vec<f64>,
    pub gamma_sum: f64,
    pub state: Vec<f64>,
    /// `(1 + Γ) Δt`.
    pub adjusted_dt: f64,
    /// `G(u_γ) - G(u^n)`.
    pub residual: Vec<f64>,
    pub diagnostics: SolverDiagnostics,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxationError {
    #[error("relaxation did not converge (best residual {best_residual:e})")]
    NonConvergence { best_residual: f64, gamma: Vec<f64> },
    #[error("singular relaxation Jacobian and no fallback solution (best residual {best_residual:e})")]
    SingularJacobian { best_residual: f64, gamma: Vec<f64> },
    #[error("{invariants} invariants need as many directions, step has {directions}")]
    DirectionCount { invariants: usize, directions: usize },
    #[error(transparent)]
    Invariant(#[from] ProblemError),
}

/// Stacked directions `D = [d_1 | … | d_ℓ]` and `∇G(u^{n+1}) D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionMatrix {
    pub d: DMatrix<f64>,
    pub jacobian_core: DMatrix<f64>,
}

impl DirectionMatrix {
    /// Uses the first `invariants.invariant_count()` directions of `record`.
    pub fn new<I: Invariants + ?Sized>(
        invariants: &I,
        record: &StepRecord,
    ) -> Result<Self, RelaxationError> {
        let l = invariants.invariant_count();
        if record.directions.len() < l || l == 0 {
            return Err(RelaxationError::DirectionCount {
                invariants: l,
                directions: record.directions.len(),
            });
        }
        let m = record.update.len();
        let d = DMatrix::from_fn(m, l, |i, k| record.directions[k][i]);
        let jacobian_core = invariants.invariant_gradients(&record.update)? * &d;
        Ok(DirectionMatrix { d, jacobian_core })
    }
}

/// The map `γ ↦ G(u^{n+1} + Δt D γ) - target`.
pub struct RelaxationSystem<'a, I: ?Sized> {
    invariants: &'a I,
    base: &'a [f64],
    dt: f64,
    d: DMatrix<f64>,
    target: Vec<f64>,
}

impl<'a, I: Invariants + ?Sized> RelaxationSystem<'a, I> {
    pub fn new(
        invariants: &'a I,
        record: &'a StepRecord,
        target: &[f64],
    ) -> Result<Self, RelaxationError> {
        let dm = DirectionMatrix::new(invariants, record)?;
        Ok(RelaxationSystem {
            invariants,
            base: &record.update,
            dt: record.step_size,
            d: dm.d,
            target: target.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.d.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.d.ncols() == 0
    }

    pub fn state(&self, gamma: &[f64]) -> Vec<f64> {
        let shift = &self.d * DVector::from_column_slice(gamma);
        self.base
            .iter()
            .zip(shift.iter())
            .map(|(u, s)| u + self.dt * s)
            .collect()
    }

    /// Residual and the state it was evaluated at.
    pub fn residual(&self, gamma: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ProblemError> {
        let state = self.state(gamma);
        let g = self.invariants.invariants(&state)?;
        let r = g.iter().zip(&self.target).map(|(a, b)| a - b).collect();
        Ok((r, state))
    }

    /// `Δt ∇G(u_γ) D`.
    pub fn jacobian_at_state(&self, state: &[f64]) -> Result<DMatrix<f64>, ProblemError> {
        Ok(self.invariants.invariant_gradients(state)? * &self.d * self.dt)
    }

    pub fn jacobian(&self, gamma: &[f64]) -> Result<DMatrix<f64>, ProblemError> {
        self.jacobian_at_state(&self.state(gamma))
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Newton direction for `J δ = -r`; minimum-norm when `J` is numerically singular.
fn newton_direction(jac: DMatrix<f64>, r: &[f64]) -> (Vec<f64>, bool) {
    let rhs = -DVector::from_column_slice(r);
    let svd = jac.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let singular = !(smax > 0.0) || smax > SINGULAR_CONDITION * smin;
    let cut = if singular { smax / SINGULAR_CONDITION } else { 0.0 };
    match svd.solve(&rhs, cut) {
        Ok(x) if x.iter().all(|v| v.is_finite()) => (x.as_slice().to_vec(), singular),
        _ => (vec![0.0; r.len()], true),
    }
}

struct Candidate {
    gamma: Vec<f64>,
    residual: Vec<f64>,
    state: Vec<f64>,
}

impl Candidate {
    fn norm(&self) -> f64 {
        max_abs(&self.residual)
    }

    /// Better residual wins; near-ties go to the smaller `γ`.
    fn better_than(&self, other: &Candidate, tol: f64) -> bool {
        let (a, b) = (self.norm(), other.norm());
        if a <= tol && b <= tol {
            max_abs(&self.gamma) < max_abs(&other.gamma)
        } else {
            a < b
        }
    }
}

struct NewtonOutcome {
    best: Candidate,
    iterations: usize,
    singular: bool,
}

fn newton<I: Invariants + ?Sized>(
    sys: &RelaxationSystem<'_, I>,
    start: Candidate,
    tol: f64,
    max_iter: usize,
    polish: usize,
) -> NewtonOutcome {
    let mut cur = start;
    let mut iterations = 0;
    let mut singular = false;
    let mut polishing = 0;
    while iterations < max_iter {
        let converged = cur.norm() <= tol;
        if converged && (polishing >= polish || cur.norm() == 0.0) {
            break;
        }
        let Ok(jac) = sys.jacobian_at_state(&cur.state) else {
            break;
        };
        let (delta, sing) = newton_direction(jac, &cur.residual);
        singular |= sing;
        iterations += 1;
        let cur_sq = sum_sq(&cur.residual);
        let mut lambda = 1.0;
        let mut accepted = None;
        // Once converged, only full steps that still reduce the residual are taken.
        let min_lambda = if converged { 1.0 } else { 1.0 / 1024.0 };
        while lambda >= min_lambda {
            let trial: Vec<f64> = cur.gamma.iter().zip(&delta).map(|(g, d)| g + lambda * d).collect();
            if let Ok((r, s)) = sys.residual(&trial) {
                if sum_sq(&r) < cur_sq {
                    accepted = Some(Candidate {
                        gamma: trial,
                        residual: r,
                        state: s,
                    });
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some(next) => {
                cur = next;
                if converged {
                    polishing += 1;
                }
            }
            None => break,
        }
    }
    NewtonOutcome {
        best: cur,
        iterations,
        singular,
    }
}

fn objective<I: Invariants + ?Sized>(sys: &RelaxationSystem<'_, I>, gamma: &[f64]) -> f64 {
    match sys.residual(gamma) {
        Ok((r, _)) => {
            let v = sum_sq(&r);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Best point of a uniform grid on `[-h, h]^ℓ`.
fn grid_search<I: Invariants + ?Sized>(
    sys: &RelaxationSystem<'_, I>,
    points: usize,
    h: f64,
) -> (Vec<f64>, f64) {
    let l = sys.len();
    let points = points.max(2);
    let axis: Vec<f64> = (0..points)
        .map(|k| -h + 2.0 * h * k as f64 / (points - 1) as f64)
        .collect();
    let mut best = (vec![0.0; l], objective(sys, &vec![0.0; l]));
    let mut idx = vec![0usize; l];
    loop {
        let gamma: Vec<f64> = idx.iter().map(|&k| axis[k]).collect();
        let v = objective(sys, &gamma);
        if v < best.1 {
            best = (gamma, v);
        }
        let mut pos = 0;
        loop {
            if pos == l {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < points {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Nelder-Mead minimisation from `start` with initial edge length `step`.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        let v = f(&p);
        simplex.push((p, v));
    }
    let mut evals = n + 1;
    let point = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
    };
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if best == 0.0 || (worst - best).abs() <= f64::EPSILON * best.abs() {
            let size = simplex
                .iter()
                .map(|(p, _)| max_abs(&point(&simplex[0].0, p, 1.0)))
                .fold(0.0, f64::max);
            if size <= f64::EPSILON * max_abs(&simplex[0].0).max(1e-300) || best == 0.0 {
                break;
            }
        }
        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }
        let worst_p = simplex[n].0.clone();
        let reflected = point(&centroid, &worst_p, -1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = point(&centroid, &worst_p, -2.0);
            let fe = f(&expanded);
            evals += 1;
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (towards, ft) = if fr < simplex[n].1 {
                (reflected.clone(), fr)
            } else {
                (worst_p.clone(), simplex[n].1)
            };
            let contracted = point(&centroid, &towards, 0.5);
            let fc = f(&contracted);
            evals += 1;
            if fc < ft {
                simplex[n] = (contracted, fc);
            } else {
                let best_p = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p = point(&best_p, &entry.0, 0.5);
                    let v = f(&p);
                    *entry = (p, v);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Solve for `γ` given a finished step and `target = G(u^n)`.
pub fn solve_relaxation<I: Invariants + ?Sized>(
    invariants: &I,
    record: &StepRecord,
    target: &[f64],
    cfg: &SolverConfig,
) -> Result<RelaxedStep, RelaxationError> {
    let sys = RelaxationSystem::new(invariants, record, target)?;
    let l = sys.len();
    let tol = cfg.tol * (1.0 + max_abs(target));
    let zero = vec![0.0; l];
    let (r0, s0) = sys.residual(&zero)?;
    let start = Candidate {
        gamma: zero,
        residual: r0,
        state: s0,
    };
    let outcome = newton(&sys, start, tol, cfg.max_iter, cfg.polish_iterations);
    let mut iterations = outcome.iterations;
    let singular = outcome.singular;
    let mut best = outcome.best;
    let mut method = SolveMethod::Newton;

    if best.norm() > tol {
        let h = cfg.fallback_half_width;
        let (g, _) = grid_search(&sys, cfg.fallback_grid, h);
        let step = 2.0 * h / (cfg.fallback_grid.max(2) - 1) as f64;
        let (g, _) = nelder_mead(|x| objective(&sys, x), &g, step, 400 * (l + 1));
        if let Ok((r, s)) = sys.residual(&g) {
            let refined = newton(
                &sys,
                Candidate {
                    gamma: g,
                    residual: r,
                    state: s,
                },
                tol,
                cfg.max_iter,
                cfg.polish_iterations,
            );
            iterations += refined.iterations;
            if refined.best.better_than(&best, tol) {
                best = refined.best;
                method = SolveMethod::Fallback;
            }
        }
    }

    let converged = best.norm() <= tol;
    if !converged && !cfg.allow_inexact {
        let best_residual = best.norm();
        return Err(if singular {
            RelaxationError::SingularJacobian {
                best_residual,
                gamma: best.gamma,
            }
        } else {
            RelaxationError::NonConvergence {
                best_residual,
                gamma: best.gamma,
            }
        });
    }
    let gamma_sum: f64 = best.gamma.iter().sum();
    let wrong_branch = cfg.branch_bound.is_some_and(|b| max_abs(&best.gamma) > b);
    Ok(RelaxedStep {
        gamma_sum,
        adjusted_dt: (1.0 + gamma_sum) * record.step_size,
        gamma: best.gamma,
        state: best.state,
        residual: best.residual,
        diagnostics: SolverDiagnostics {
            iterations,
            method,
            converged,
            singular_jacobian: singular,
            wrong_branch,
        },
    })
}

/// Relaxed run: times, states and per-step solver output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelaxedTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `γ` of each step (one entry fewer than `times`).
    pub gammas: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
    pub inexact_steps: usize,
    pub fallback_steps: usize,
    pub wrong_branch_steps: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxedRunError {
    #[error("step {step} at t = {t}: {source}")]
    Step {
        step: usize,
        t: f64,
        source: StepError,
    },
    #[error("step {step} at t = {t}: {source}")]
    Relaxation {
        step: usize,
        t: f64,
        source: RelaxationError,
    },
    #[error("step {step} at t = {t}: relaxed step size {adjusted_dt} is not positive")]
    TimeReversal { step: usize, t: f64, adjusted_dt: f64 },
    #[error(transparent)]
    Invariant(#[from] ProblemError),
}

/// Relaxed integration with a caller-supplied step function.
///
/// Steps are never shortened: the run ends at the first relaxed time at or
/// beyond `t_final`.
pub fn relaxed_integrate_with<I, S>(
    invariants: &I,
    mut step: S,
    t0: f64,
    u0: Vec<f64>,
    dt: f64,
    t_final: f64,
    cfg: &SolverConfig,
) -> Result<RelaxedTrajectory, RelaxedRunError>
where
    I: Invariants + ?Sized,
    S: FnMut(f64, &[f64], f64) -> Result<StepRecord, StepError>,
{
    assert!(dt > 0.0, "step size must be positive");
    let end = t_final - 1e-12 * dt;
    let mut out = RelaxedTrajectory {
        times: vec![t0],
        states: vec![u0.clone()],
        ..Default::default()
    };
    let mut t = t0;
    let mut u = u0;
    let mut target = invariants.invariants(&u)?;
    let mut n = 0;
    while t < end {
        let record = step(t, &u, dt).map_err(|source| RelaxedRunError::Step { step: n, t, source })?;
        let relaxed = solve_relaxation(invariants, &record, &target, cfg)
            .map_err(|source| RelaxedRunError::Relaxation { step: n, t, source })?;
        if !(relaxed.adjusted_dt > 0.0) {
            return Err(RelaxedRunError::TimeReversal {
                step: n,
                t,
                adjusted_dt: relaxed.adjusted_dt,
            });
        }
        let d = &relaxed.diagnostics;
        out.inexact_steps += usize::from(!d.converged);
        out.fallback_steps += usize::from(d.method == SolveMethod::Fallback);
        out.wrong_branch_steps += usize::from(d.wrong_branch);
        t += relaxed.adjusted_dt;
        u = relaxed.state;
        target = invariants.invariants(&u)?;
        out.times.push(t);
        out.states.push(u.clone());
        out.gammas.push(relaxed.gamma);
        out.residuals.push(relaxed.residual);
        n += 1;
    }
    Ok(out)
}

/// Relaxed run of an explicit embedded set, enforcing the invariants listed in
/// `selector` with the first `selector.len()` weight vectors.
pub fn relaxed_integrate<P: OdeProblem + ?Sized>(
    problem: &P,
    set: &EmbeddedSet,
    dt: f64,
    t_final: f64,
    selector: &[usize],
    cfg: &SolverConfig,
) -> Result<RelaxedTrajectory, RelaxedRunError> {
    let invariants = Selected::new(problem, selector);
    relaxed_integrate_with(
        &invariants,
        |t, u, h| explicit_step(problem, set, t, u, h),
        problem.initial_time(),
        problem.initial_state(),
        dt,
        t_final,
        cfg,
    )
}

/// `max_i |γ_i|` of a single relaxed step from the initial state, per step size.
pub fn gamma_scaling_probe<P: OdeProblem + ?Sized>(
    problem: &P,
    set: &EmbeddedSet,
    dts: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>, RelaxedRunError> {
    let u0 = problem.initial_state();
    let t0 = problem.initial_time();
    let target = problem.invariants(&u0)?;
    dts.iter()
        .enumerate()
        .map(|(n, &dt)| {
            let record = explicit_step(problem, set, t0, &u0, dt)
                .map_err(|source| RelaxedRunError::Step { step: n, t: t0, source })?;
            let relaxed = solve_relaxation(problem, &record, &target, cfg)
                .map_err(|source| RelaxedRunError::Relaxation { step: n, t: t0, source })?;
            Ok(max_abs(&relaxed.gamma))
        })
        .collect()
}
