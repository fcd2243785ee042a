//! Adaptive Dormand-Prince reference solutions with dense output.
//!
//! Used where no closed form is available. The fifth-order solution is
//! propagated and the embedded fourth-order weights drive a standard
//! step-size controller. Between accepted steps the solution is a quartic
//! continuous extension built from the seven stage slopes.

use thiserror::Error;

use crate::problems::{OdeProblem, ProblemError};
use crate::tableaux::{embedded_set, EmbeddedSet};

/// Smallest tolerance accepted; anything tighter is below what double
/// precision can deliver for these problems.
pub const MIN_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReferenceError {
    #[error("step size {h:e} underflowed at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("t = {t} outside [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("right-hand side failed at t = {t}: {source}")]
    Rhs { t: f64, source: ProblemError },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            rtol: MIN_TOLERANCE,
            atol: MIN_TOLERANCE,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ControllerStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

/// Coefficients of `θ, θ², θ³, θ⁴` multiplying each stage slope.
const DENSE: [[f64; 4]; 7] = [
    [
        1.0,
        -8048581381.0 / 2820520608.0,
        8663915743.0 / 2820520608.0,
        -12715105075.0 / 11282082432.0,
    ],
    [0.0; 4],
    [
        0.0,
        131558114200.0 / 32700410799.0,
        -68118460800.0 / 10900136933.0,
        87487479700.0 / 32700410799.0,
    ],
    [
        0.0,
        -1754552775.0 / 470086768.0,
        14199869525.0 / 1410260304.0,
        -10690763975.0 / 1880347072.0,
    ],
    [
        0.0,
        127303824393.0 / 49829197408.0,
        -318862633887.0 / 49829197408.0,
        701980252875.0 / 199316789632.0,
    ],
    [
        0.0,
        -282668133.0 / 205662961.0,
        2019193451.0 / 616988883.0,
        -1453857185.0 / 822651844.0,
    ],
    [
        0.0,
        40617522.0 / 29380423.0,
        -110615467.0 / 29380423.0,
        69997945.0 / 29380423.0,
    ],
];

/// Dense solution on `[t0, t_final]`.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    /// Per step, `h Σ_i k_i P_i` flattened as `dim × 4`.
    dense: Vec<Vec<f64>>,
    stats: ControllerStats,
}

impl ReferenceSolution {
    /// Accepted step boundaries.
    pub fn mesh(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn stats(&self) -> ControllerStats {
        self.stats
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn evaluate(&self, t: f64) -> Result<Vec<f64>, ReferenceError> {
        let (start, end) = self.span();
        if !(t >= start && t <= end) {
            return Err(ReferenceError::OutOfRange { t, start, end });
        }
        if self.dense.is_empty() {
            return Ok(self.states[0].clone());
        }
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.dense.len()) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let theta = (t - t0) / (t1 - t0);
        let powers = [theta, theta * theta, theta.powi(3), theta.powi(4)];
        let q = &self.dense[i];
        Ok(self.states[i]
            .iter()
            .enumerate()
            .map(|(j, y)| y + (0..4).map(|p| q[4 * j + p] * powers[p]).sum::<f64>())
            .collect())
    }
}

fn rms_norm(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
}

/// Solves from the problem's initial condition to `t_final` with default options
/// apart from the tolerances, which are clamped to [`MIN_TOLERANCE`].
pub fn solve_reference<P: OdeProblem + ?Sized>(
    problem: &P,
    t_final: f64,
    rtol: f64,
    atol: f64,
) -> Result<ReferenceSolution, ReferenceError> {
    solve_reference_with(
        problem,
        t_final,
        &ReferenceOptions {
            rtol,
            atol,
            ..ReferenceOptions::default()
        },
    )
}

pub fn solve_reference_with<P: OdeProblem + ?Sized>(
    problem: &P,
    t_final: f64,
    opts: &ReferenceOptions,
) -> Result<ReferenceSolution, ReferenceError> {
    let dp: EmbeddedSet = embedded_set("DP(7,5)").expect("DP(7,5) is in the catalogue");
    let (a, c) = (&dp.a, &dp.c);
    let b = &dp.weights[0];
    let err_w: Vec<f64> = (0..7).map(|i| b[i] - dp.weights[1][i]).collect();
    let rtol = opts.rtol.max(MIN_TOLERANCE);
    let atol = opts.atol.max(MIN_TOLERANCE);

    let m = problem.dim();
    let mut t = problem.initial_time();
    let mut y = problem.initial_state();
    let mut stats = ControllerStats::default();
    let rhs = |t: f64, u: &[f64], out: &mut [f64], stats: &mut ControllerStats| {
        stats.rhs_evaluations += 1;
        problem.rhs(t, u, out).map_err(|source| ReferenceError::Rhs { t, source })
    };

    let mut sol = ReferenceSolution {
        times: vec![t],
        states: vec![y.clone()],
        dense: Vec::new(),
        stats,
    };
    let direction = t_final - t;
    if direction <= 0.0 {
        return Ok(sol);
    }

    let mut k = vec![vec![0.0; m]; 7];
    rhs(t, &y, &mut k[0], &mut stats)?;

    // Initial step from the usual derivative-based estimate.
    let scale: Vec<f64> = y.iter().map(|v| atol + rtol * v.abs()).collect();
    let d0 = rms_norm(y.iter().zip(&scale).map(|(v, s)| v / s), m);
    let d1 = rms_norm(k[0].iter().zip(&scale).map(|(v, s)| v / s), m);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(direction);

    let mut stage = vec![0.0; m];
    let mut y_new = vec![0.0; m];
    let mut last_rejected = false;
    while t < t_final {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(ReferenceError::TooManySteps(opts.max_steps));
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        if h < h_min {
            return Err(ReferenceError::StepUnderflow { t, h });
        }
        let last = t + h >= t_final;
        if last {
            h = t_final - t;
        }
        for i in 1..7 {
            for j in 0..m {
                stage[j] = y[j] + h * (0..i).map(|l| a[(i, l)] * k[l][j]).sum::<f64>();
            }
            rhs(t + c[i] * h, &stage, &mut k[i], &mut stats)?;
        }
        // Stage 7 is evaluated at the fifth-order solution (first same as last).
        y_new.copy_from_slice(&stage);
        let err = rms_norm(
            (0..m).map(|j| {
                let e = h * (0..7).map(|i| err_w[i] * k[i][j]).sum::<f64>();
                e / (atol + rtol * y[j].abs().max(y_new[j].abs()))
            }),
            m,
        );
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            let mut q = vec![0.0; 4 * m];
            for j in 0..m {
                for p in 0..4 {
                    q[4 * j + p] = h * (0..7).map(|i| DENSE[i][p] * k[i][j]).sum::<f64>();
                }
            }
            t = if last { t_final } else { t + h };
            y.copy_from_slice(&y_new);
            let fsal = k[6].clone();
            k[0] = fsal;
            sol.times.push(t);
            sol.states.push(y.clone());
            sol.dense.push(q);
            stats.accepted += 1;
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= if last_rejected { grow.min(1.0) } else { grow };
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            last_rejected = true;
        }
    }
    sol.stats = stats;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Invariants, LotkaVolterra, RigidBody};
    use nalgebra::DMatrix;

    /// `u' = λ u^p` with no invariants.
    struct Power {
        lambda: f64,
        p: i32,
    }

    impl Invariants for Power {
        fn invariant_count(&self) -> usize {
            0
        }
        fn invariants(&self, _u: &[f64]) -> Result<Vec<f64>, ProblemError> {
            Ok(Vec::new())
        }
        fn invariant_gradients(&self, u: &[f64]) -> Result<DMatrix<f64>, ProblemError> {
            Ok(DMatrix::zeros(0, u.len()))
        }
    }

    impl OdeProblem for Power {
        fn name(&self) -> &str {
            "power"
        }
        fn dim(&self) -> usize {
            1
        }
        fn initial_state(&self) -> Vec<f64> {
            vec![1.0]
        }
        fn rhs(&self, _t: f64, u: &[f64], du: &mut [f64]) -> Result<(), ProblemError> {
            du[0] = self.lambda * u[0].powi(self.p);
            Ok(())
        }
    }

    #[test]
    fn dense_weights_reproduce_step() {
        let dp = embedded_set("DP(7,5)").unwrap();
        for i in 0..7 {
            let sum: f64 = DENSE[i].iter().sum();
            assert!((sum - dp.weights[0][i]).abs() < 1e-15, "stage {i}");
        }
    }

    #[test]
    fn exponential() {
        let sol = solve_reference(&Power { lambda: 1.0, p: 1 }, 1.0, 1e-13, 1e-13).unwrap();
        assert!((sol.evaluate(1.0).unwrap()[0] - std::f64::consts::E).abs() < 1e-12);
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            assert!((sol.evaluate(t).unwrap()[0] - t.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn rigid_body_matches_jacobi_solution() {
        let p = RigidBody::default();
        let sol = solve_reference(&p, 100.0, 1e-13, 1e-13).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=1000 {
            let t = 0.1 * i as f64;
            let (r, e) = (sol.evaluate(t).unwrap(), p.exact(t).unwrap());
            worst = worst.max(r.iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        assert!(worst <= 1e-10, "{worst:e}");
    }

    #[test]
    fn lotka_volterra_invariants() {
        let p = LotkaVolterra::default();
        let sol = solve_reference(&p, 400.0, 1e-13, 1e-13).unwrap();
        let g0 = p.invariants(&p.initial_state()).unwrap();
        let drift = sol
            .states()
            .iter()
            .map(|u| {
                let g = p.invariants(u).unwrap();
                g.iter().zip(&g0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        assert!(drift <= 1e-9, "{drift:e}");
    }

    #[test]
    fn dense_output_continuous_at_mesh_points() {
        let p = RigidBody::default();
        let sol = solve_reference(&p, 10.0, 1e-10, 1e-10).unwrap();
        for (i, &t) in sol.mesh().iter().enumerate().skip(1).take(200) {
            let left = sol.evaluate(t - 1e-12 * t).unwrap();
            for (a, b) in left.iter().zip(&sol.states()[i]) {
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn tighter_tolerance_is_not_worse() {
        let p = RigidBody::default();
        let err = |tol: f64| {
            let sol = solve_reference(&p, 20.0, tol, tol).unwrap();
            let (r, e) = (sol.evaluate(20.0).unwrap(), p.exact(20.0).unwrap());
            r.iter().zip(&e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let mut prev = f64::INFINITY;
        for tol in [1e-6, 5e-7, 1e-8, 5e-9, 1e-10] {
            let e = err(tol);
            assert!(e <= prev * 1.5, "tol {tol:e}: {e:e} vs {prev:e}");
            prev = e;
        }
    }

    #[test]
    fn tolerance_refinement_is_consistent() {
        let p = RigidBody::default();
        let coarse = solve_reference(&p, 20.0, 1e-9, 1e-9).unwrap();
        let fine = solve_reference(&p, 20.0, 1e-10, 1e-10).unwrap();
        let exact = p.exact(20.0).unwrap();
        let est: f64 = coarse
            .evaluate(20.0)
            .unwrap()
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let change: f64 = coarse
            .evaluate(20.0)
            .unwrap()
            .iter()
            .zip(fine.evaluate(20.0).unwrap())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(change <= 10.0 * est.max(1e-13), "{change:e} vs {est:e}");
    }

    #[test]
    fn out_of_range_queries() {
        let sol = solve_reference(&Power { lambda: -1.0, p: 1 }, 2.0, 1e-8, 1e-8).unwrap();
        assert!(matches!(sol.evaluate(2.5), Err(ReferenceError::OutOfRange { .. })));
        assert!(matches!(sol.evaluate(-0.1), Err(ReferenceError::OutOfRange { .. })));
        assert!(sol.evaluate(f64::NAN).is_err());
        assert!(sol.evaluate(2.0).is_ok());
    }

    #[test]
    fn blow_up_underflows() {
        // u' = u^2, u(0) = 1 blows up at t = 1.
        let r = solve_reference(&Power { lambda: 1.0, p: 2 }, 2.0, 1e-10, 1e-10);
        match r {
            Err(ReferenceError::StepUnderflow { t, .. }) => assert!((t - 1.0).abs() < 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tolerances_are_clamped() {
        let p = Power { lambda: 1.0, p: 1 };
        let a = solve_reference(&p, 1.0, 1e-16, 1e-16).unwrap();
        let b = solve_reference(&p, 1.0, MIN_TOLERANCE, MIN_TOLERANCE).unwrap();
        assert_eq!(a.stats(), b.stats());
    }

    #[test]
    fn empty_interval() {
        let sol = solve_reference(&Power { lambda: 1.0, p: 1 }, 0.0, 1e-8, 1e-8).unwrap();
        assert_eq!(sol.mesh(), &[0.0]);
        assert_eq!(sol.evaluate(0.0).unwrap(), vec![1.0]);
    }
}
