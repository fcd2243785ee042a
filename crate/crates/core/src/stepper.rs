//! Explicit Runge-Kutta steps for embedded sets.
//!
//! The stages are computed once; every weight vector of the set then yields a
//! direction `d_k = Σ_j b^k_j f(t + c_j Δt, g_j)` at no extra cost.

use nalgebra::DVector;
use thiserror::Error;

use crate::problems::{OdeProblem, ProblemError};
use crate::tableaux::EmbeddedSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("stage {stage} at t = {t}: {source}")]
    Rhs {
        stage: usize,
        t: f64,
        source: ProblemError,
    },
    #[error("stage {stage} at t = {t}: {msg}")]
    Solve { stage: usize, t: f64, msg: String },
}

/// Everything produced by one step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub start_time: f64,
    pub step_size: f64,
    pub start_state: Vec<f64>,
    pub stage_states: Vec<Vec<f64>>,
    pub stage_slopes: Vec<Vec<f64>>,
    /// One direction per weight vector.
    pub directions: Vec<Vec<f64>>,
    /// `u^n + Δt d_1`.
    pub update: Vec<f64>,
}

/// `Σ_j w_j v_j` over the stage vectors.
pub fn combine(weights: &DVector<f64>, vectors: &[Vec<f64>]) -> Vec<f64> {
    let m = vectors.first().map_or(0, Vec::len);
    let mut out = vec![0.0; m];
    for (w, v) in weights.iter().zip(vectors) {
        if *w != 0.0 {
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
    }
    out
}

impl StepRecord {
    /// Builds directions and the baseline update from finished stages.
    pub fn from_stages(
        start_time: f64,
        step_size: f64,
        start_state: Vec<f64>,
        stage_states: Vec<Vec<f64>>,
        stage_slopes: Vec<Vec<f64>>,
        weights: &[DVector<f64>],
    ) -> Self {
        let directions: Vec<Vec<f64>> = weights.iter().map(|b| combine(b, &stage_slopes)).collect();
        let update = start_state
            .iter()
            .zip(&directions[0])
            .map(|(u, d)| u + step_size * d)
            .collect();
        StepRecord {
            start_time,
            step_size,
            start_state,
            stage_states,
            stage_slopes,
            directions,
            update,
        }
    }

    /// Update of the `k`-th method alone, `u^n + Δt d_k`.
    pub fn single_update(&self, k: usize) -> Vec<f64> {
        self.start_state
            .iter()
            .zip(&self.directions[k])
            .map(|(u, d)| u + self.step_size * d)
            .collect()
    }
}

/// One step of `set` from `(t, u)`; exactly `s` right-hand side evaluations.
pub fn explicit_step<P: OdeProblem + ?Sized>(
    problem: &P,
    set: &EmbeddedSet,
    t: f64,
    u: &[f64],
    dt: f64,
) -> Result<StepRecord, StepError> {
    let s = set.stages();
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut slopes: Vec<Vec<f64>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut g = u.to_vec();
        for (j, k) in slopes.iter().enumerate() {
            let a = set.a[(i, j)];
            if a != 0.0 {
                for (gi, ki) in g.iter_mut().zip(k) {
                    *gi += dt * a * ki;
                }
            }
        }
        let ti = t + set.c[i] * dt;
        let mut f = vec![0.0; u.len()];
        problem.rhs(ti, &g, &mut f).map_err(|source| StepError::Rhs {
            stage: i,
            t: ti,
            source,
        })?;
        states.push(g);
        slopes.push(f);
    }
    Ok(StepRecord::from_stages(t, dt, u.to_vec(), states, slopes, &set.weights))
}

/// Times and states of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.states.last()?.as_slice()))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("step failed at t = {t}: {source}")]
pub struct IntegrationError {
    pub t: f64,
    pub state: Vec<f64>,
    pub source: StepError,
}

/// Grid times `t0 + kΔt`, with the last step shortened to land on `t_final`.
pub fn step_grid(t0: f64, dt: f64, t_final: f64) -> Vec<f64> {
    assert!(dt > 0.0, "step size must be positive");
    let span = t_final - t0;
    if span <= 0.0 {
        return vec![t0];
    }
    // A remainder below this fraction of Δt is treated as rounding.
    let full = (span / dt * (1.0 - 1e-12)).ceil() as usize;
    let mut times: Vec<f64> = (0..full).map(|k| t0 + k as f64 * dt).collect();
    times.push(t_final);
    times
}

/// Baseline integration with the first weight vector of `set`.
pub fn fixed_grid_integrate<P: OdeProblem + ?Sized>(
    problem: &P,
    set: &EmbeddedSet,
    dt: f64,
    t_final: f64,
) -> Result<Trajectory, IntegrationError> {
    let grid = step_grid(problem.initial_time(), dt, t_final);
    let mut u = problem.initial_state();
    let mut out = Trajectory {
        times: vec![grid[0]],
        states: vec![u.clone()],
    };
    for w in grid.windows(2) {
        let record = explicit_step(problem, set, w[0], &u, w[1] - w[0]).map_err(|source| {
            IntegrationError {
                t: w[0],
                state: u.clone(),
                source,
            }
        })?;
        u = record.update;
        out.times.push(w[1]);
        out.states.push(u.clone());
    }
    Ok(out)
}
