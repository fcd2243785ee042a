//! Korteweg-de Vries equation `u_t + 6 u u_x + u_xxx = 0` on a periodic grid.
//!
//! The nonlinear term is discretised in split form,
//! `f^E(U) = -2 (D₁(U²) + U D₁U)`, which together with skew-symmetric Fourier
//! differentiation conserves the discrete mass `η₀ = Δx ΣU` and energy
//! `η₁ = Δx ΣU²`. The dispersive term `f^I(U) = -D₃U` is stiff and is treated
//! implicitly by the additive Runge-Kutta pairs; each implicit stage is a
//! pointwise division in Fourier space.

mod experiment;
mod grid;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use thiserror::Error;

pub use experiment::{
    run_kdv, write_kdv_csv, KdvConfig, KdvRow, KdvRun, KdvSummary, RelaxMode,
};
pub use grid::SpectralGrid;

use crate::problems::{Invariants, OdeProblem, ProblemError, Soliton};
use crate::stepper::{StepError, StepRecord};
use crate::tableaux::ArkPair;

#[derive(Debug, Error)]
pub enum KdvError {
    #[error("bad grid: {0}")]
    Grid(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Run(#[from] crate::relaxation::RelaxedRunError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Tableau(#[from] crate::tableaux::TableauError),
}

/// Split-form pseudospectral semi-discretization.
#[derive(Debug, Clone)]
pub struct KdvSemiDiscretization {
    pub grid: SpectralGrid,
    /// When false the nonlinear term is dropped (linear Airy equation).
    pub nonlinear: bool,
    d3_symbol: Vec<Complex64>,
    /// Composite Simpson weights for periodic data: 2 at odd 1-based indices, 4 at even.
    simpson: Vec<f64>,
}

impl KdvSemiDiscretization {
    pub fn new(grid: SpectralGrid) -> Self {
        let d3_symbol = grid.symbol(3);
        let simpson = (0..grid.len()).map(|j| if j % 2 == 0 { 2.0 } else { 4.0 }).collect();
        KdvSemiDiscretization {
            grid,
            nonlinear: true,
            d3_symbol,
            simpson,
        }
    }

    /// `u_t + u_xxx = 0` on the same grid.
    pub fn airy(grid: SpectralGrid) -> Self {
        KdvSemiDiscretization {
            nonlinear: false,
            ..Self::new(grid)
        }
    }

    pub fn explicit_rhs(&self, u: &[f64]) -> Vec<f64> {
        if !self.nonlinear {
            return vec![0.0; u.len()];
        }
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        let d_sq = self.grid.derivative(&sq, 1);
        let du = self.grid.derivative(u, 1);
        (0..u.len()).map(|j| -2.0 * (d_sq[j] + u[j] * du[j])).collect()
    }

    pub fn implicit_rhs(&self, u: &[f64]) -> Vec<f64> {
        self.grid.derivative(u, 3).iter().map(|v| -v).collect()
    }

    pub fn rhs(&self, u: &[f64]) -> Vec<f64> {
        let mut f = self.explicit_rhs(u);
        for (a, b) in f.iter_mut().zip(self.implicit_rhs(u)) {
            *a += b;
        }
        f
    }

    /// Solves `g - h f^I(g) = r` exactly in Fourier space.
    pub fn solve_implicit(&self, r: &[f64], h: f64) -> Vec<f64> {
        let mut c = self.grid.transform(r);
        for (cj, s) in c.iter_mut().zip(&self.d3_symbol) {
            // f^I has symbol -(ik)^3.
            *cj /= Complex64::new(1.0, 0.0) + h * s;
        }
        self.grid.inverse_transform(c)
    }

    /// `(η₀, η₁, η₂)`.
    pub fn invariants(&self, u: &[f64]) -> [f64; 3] {
        let dx = self.grid.dx();
        let eta0 = dx * u.iter().sum::<f64>();
        let eta1 = dx * u.iter().map(|x| x * x).sum::<f64>();
        let v = self.grid.derivative(u, 1);
        let eta2 = dx / 3.0
            * (0..u.len())
                .map(|j| self.simpson[j] * (2.0 * u[j] * u[j] * u[j] - v[j] * v[j]))
                .sum::<f64>();
        [eta0, eta1, eta2]
    }

    /// Rows `∇η₀, ∇η₁, ∇η₂`.
    pub fn invariant_gradients(&self, u: &[f64]) -> DMatrix<f64> {
        let n = u.len();
        let dx = self.grid.dx();
        let v = self.grid.derivative(u, 1);
        let wv: Vec<f64> = (0..n).map(|j| self.simpson[j] * v[j]).collect();
        // d/dU of -Σ w V² is -2 D₁ᵀ(wV) = 2 D₁(wV) by skew-symmetry.
        let d_wv = self.grid.derivative(&wv, 1);
        DMatrix::from_fn(3, n, |i, j| match i {
            0 => dx,
            1 => 2.0 * dx * u[j],
            _ => dx / 3.0 * (6.0 * self.simpson[j] * u[j] * u[j] + 2.0 * d_wv[j]),
        })
    }
}

/// KdV with an exact multi-soliton solution as an [`OdeProblem`].
#[derive(Debug, Clone)]
pub struct KdvProblem {
    pub semi: KdvSemiDiscretization,
    pub soliton: Soliton,
    pub t0: f64,
    points: Vec<f64>,
}

impl KdvProblem {
    pub fn new(semi: KdvSemiDiscretization, soliton: Soliton, t0: f64) -> Self {
        let points = semi.grid.points();
        KdvProblem {
            semi,
            soliton,
            t0,
            points,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

impl Invariants for KdvProblem {
    fn invariant_count(&self) -> usize {
        3
    }

    fn invariants(&self, u: &[f64]) -> Result<Vec<f64>, ProblemError> {
        Ok(self.semi.invariants(u).to_vec())
    }

    fn invariant_gradients(&self, u: &[f64]) -> Result<DMatrix<f64>, ProblemError> {
        Ok(self.semi.invariant_gradients(u))
    }
}

impl OdeProblem for KdvProblem {
    fn name(&self) -> &str {
        "kdv"
    }

    fn dim(&self) -> usize {
        self.points.len()
    }

    fn initial_time(&self) -> f64 {
        self.t0
    }

    fn initial_state(&self) -> Vec<f64> {
        self.soliton.sample(&self.points, self.t0)
    }

    fn rhs(&self, _t: f64, u: &[f64], du: &mut [f64]) -> Result<(), ProblemError> {
        du.copy_from_slice(&self.semi.rhs(u));
        Ok(())
    }

    fn exact(&self, t: f64) -> Option<Vec<f64>> {
        Some(self.soliton.sample(&self.points, t))
    }
}

/// One additive Runge-Kutta step; slopes are `f^E + f^I` and every weight
/// vector of the pair gives a direction.
pub fn imex_step(
    semi: &KdvSemiDiscretization,
    pair: &ArkPair,
    t: f64,
    u: &[f64],
    dt: f64,
) -> Result<StepRecord, StepError> {
    let s = pair.stages();
    let m = u.len();
    let mut states = Vec::with_capacity(s);
    let mut fe: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut fi: Vec<Vec<f64>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut r = u.to_vec();
        for j in 0..i {
            let (ae, ai) = (pair.explicit[(i, j)], pair.implicit[(i, j)]);
            for k in 0..m {
                r[k] += dt * (ae * fe[j][k] + ai * fi[j][k]);
            }
        }
        let aii = pair.implicit[(i, i)];
        let g = if aii == 0.0 { r } else { semi.solve_implicit(&r, dt * aii) };
        if g.iter().any(|v| !v.is_finite()) {
            return Err(StepError::Solve {
                stage: i,
                t: t + pair.c[i] * dt,
                msg: "non-finite stage value".into(),
            });
        }
        fe.push(semi.explicit_rhs(&g));
        fi.push(semi.implicit_rhs(&g));
        states.push(g);
    }
    let slopes: Vec<Vec<f64>> = fe
        .iter()
        .zip(&fi)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect();
    Ok(StepRecord::from_stages(t, dt, u.to_vec(), states, slopes, &pair.weights))
}

/// `max_t |dη₂/dt|` along the exact solution, with `dη₂/dt = ∇η₂ · f(U(t))`,
/// sampled at `samples` equispaced times in `[t0, t1]`.
pub fn eta2_drift_probe(problem: &KdvProblem, t0: f64, t1: f64, samples: usize) -> f64 {
    let samples = samples.max(2);
    (0..samples)
        .map(|i| {
            let t = t0 + (t1 - t0) * i as f64 / (samples - 1) as f64;
            let u = problem.soliton.sample(problem.points(), t);
            let grad = problem.semi.invariant_gradients(&u);
            let f = problem.semi.rhs(&u);
            grad.row(2).iter().zip(&f).map(|(g, f)| g * f).sum::<f64>().abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::SolitonCount;
    use crate::tableaux::ark_pair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, SQRT_2};

    fn semi(n: usize, lo: f64, hi: f64) -> KdvSemiDiscretization {
        KdvSemiDiscretization::new(SpectralGrid::new(n, lo, hi).unwrap())
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// Smooth periodic field built from a few random low modes.
    fn random_field(rng: &mut ChaCha8Rng, x: &[f64], length: f64) -> Vec<f64> {
        let modes: Vec<(f64, f64, f64)> = (1..=6)
            .map(|m| (m as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)))
            .collect();
        x.iter()
            .map(|&x| {
                modes
                    .iter()
                    .map(|(m, a, p)| a * (2.0 * PI * m * x / length + p).cos() / m)
                    .sum::<f64>()
                    + 0.3
            })
            .collect()
    }

    #[test]
    fn operators_are_skew_symmetric() {
        let s = semi(128, -10.0, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for order in [1, 3] {
                let lhs = dot(&v, &s.grid.derivative(&w, order)) + dot(&s.grid.derivative(&v, order), &w);
                assert!(lhs.abs() <= 1e-10 * 128.0, "order {order}: {lhs:e}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn derivatives_are_skew_for_any_field(
            v in proptest::collection::vec(-1.0f64..1.0, 64),
            w in proptest::collection::vec(-1.0f64..1.0, 64),
        ) {
            let s = semi(64, -5.0, 5.0);
            for order in [1, 3] {
                let lhs = dot(&v, &s.grid.derivative(&w, order)) + dot(&s.grid.derivative(&v, order), &w);
                proptest::prop_assert!(lhs.abs() <= 1e-9, "order {}: {:e}", order, lhs);
            }
        }
    }

    #[test]
    fn mass_and_energy_are_semi_discretely_conserved() {
        let s = semi(256, -40.0, 40.0);
        let x = s.grid.points();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let u = random_field(&mut rng, &x, 80.0);
            let f = s.rhs(&u);
            let scale = dot(&f, &f).sqrt() * dot(&u, &u).sqrt();
            assert!(f.iter().sum::<f64>().abs() <= 1e-10 * scale.max(1.0));
            assert!(dot(&u, &f).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn invariant_values() {
        let s = semi(512, -20.0, 60.0);
        assert_eq!(s.invariants(&vec![0.0; 512]), [0.0, 0.0, 0.0]);
        let u = Soliton::new(SolitonCount::One).sample(&s.grid.points(), 0.0);
        let [e0, e1, e2] = s.invariants(&u);
        assert!((e0 - 2.0 * SQRT_2).abs() < 1e-8);
        assert!((e1 - 4.0 / 3.0 * SQRT_2).abs() < 1e-8);
        // ∫ 2u³ - u_x² dx = 2√2 (16/15 - 4/15) for β = 1.
        assert!((e2 - 1.6 * SQRT_2).abs() < 1e-8, "{e2}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let s = semi(64, -8.0, 8.0);
        let x = s.grid.points();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_field(&mut rng, &x, 16.0);
        let g = s.invariant_gradients(&u);
        let h = 1e-6;
        for j in [0, 5, 17, 40, 63] {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[j] += h;
            um[j] -= h;
            let (a, b) = (s.invariants(&up), s.invariants(&um));
            for i in 0..3 {
                let fd = (a[i] - b[i]) / (2.0 * h);
                assert!((fd - g[(i, j)]).abs() <= 1e-6 * g[(i, j)].abs().max(1.0), "η{i} at {j}");
            }
        }
    }

    #[test]
    fn implicit_stage_solve_is_exact() {
        let s = semi(512, -20.0, 60.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r: Vec<f64> = (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = 0.1 * 0.435_866_521_508_459;
        let g = s.solve_implicit(&r, h);
        let fi = s.implicit_rhs(&g);
        let res: f64 = (0..512).map(|j| (g[j] - h * fi[j] - r[j]).abs()).fold(0.0, f64::max);
        let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(res <= 1e-12 * norm, "{res:e}");
    }

    /// Stability function `1 + z bᵀ (I - zA)⁻¹ e` of the implicit part.
    fn stability(pair: &ArkPair, z: Complex64) -> Complex64 {
        let s = pair.stages();
        let m = DMatrix::from_fn(s, s, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) - z * pair.implicit[(i, j)]
        });
        let e = nalgebra::DVector::from_element(s, Complex64::new(1.0, 0.0));
        let y = m.lu().solve(&e).unwrap();
        let b = &pair.weights[0];
        Complex64::new(1.0, 0.0) + z * (0..s).map(|i| y[i] * b[i]).sum::<Complex64>()
    }

    #[test]
    fn airy_step_matches_mode_oracle() {
        let grid = SpectralGrid::new(64, 0.0, 2.0 * PI).unwrap();
        let s = KdvSemiDiscretization::airy(grid);
        let x = s.grid.points();
        for name in ["ARK3(2)4L[2]SA", "ARK4(3)6L[2]SA"] {
            let pair = ark_pair(name).unwrap();
            for k in [1.0, 3.0, 7.0] {
                let u: Vec<f64> = x.iter().map(|&x| (k * x).sin()).collect();
                let dt = 0.01;
                let r = imex_step(&s, &pair, 0.0, &u, dt).unwrap();
                // f^I = -u_xxx has eigenvalue i k³ on e^{ikx}.
                let amp = stability(&pair, Complex64::new(0.0, dt * k * k * k));
                for j in 0..64 {
                    let expect = (amp * Complex64::from_polar(1.0, k * x[j])).im;
                    assert!((r.update[j] - expect).abs() < 1e-12, "{name} k={k}");
                }
            }
            // The stability function approximates e^z to the stated order.
            let p = pair.orders[0] as i32;
            let err = |z: f64| (stability(&pair, Complex64::new(0.0, z)) - Complex64::new(0.0, z).exp()).norm();
            let ratio = err(0.02) / err(0.01);
            assert!((ratio.log2() - (p + 1) as f64).abs() < 0.2, "{name}: {}", ratio.log2());
        }
    }

    #[test]
    fn step_is_consistent() {
        let s = semi(128, -20.0, 20.0);
        let pair = ark_pair("ARK4(3)6L[2]SA").unwrap();
        let u = Soliton::new(SolitonCount::One).sample(&s.grid.points(), 0.0);
        let f = s.rhs(&u);
        let mut prev = f64::INFINITY;
        for dt in [1e-3, 5e-4, 2.5e-4] {
            let r = imex_step(&s, &pair, 0.0, &u, dt).unwrap();
            let err = (0..128)
                .map(|j| (r.update[j] - u[j] - dt * f[j]).abs())
                .fold(0.0, f64::max);
            assert!(err < prev / 3.5, "second-order remainder expected");
            prev = err;
        }
    }

    #[test]
    fn baseline_conserves_mass() {
        let s = semi(256, -20.0, 60.0);
        let pair = ark_pair("ARK3(2)4L[2]SA").unwrap();
        let mut u = Soliton::new(SolitonCount::One).sample(&s.grid.points(), 0.0);
        let m0 = s.invariants(&u)[0];
        for n in 0..50 {
            u = imex_step(&s, &pair, n as f64 * 0.1, &u, 0.1).unwrap().update;
            assert!((s.invariants(&u)[0] - m0).abs() <= 1e-12);
        }
    }

    #[test]
    fn eta2_probe_on_constant_field() {
        let problem = KdvProblem::new(
            semi(64, -10.0, 10.0),
            Soliton {
                count: SolitonCount::One,
                betas: vec![0.0],
            },
            0.0,
        );
        assert_eq!(eta2_drift_probe(&problem, 0.0, 1.0, 5), 0.0);
    }
}
