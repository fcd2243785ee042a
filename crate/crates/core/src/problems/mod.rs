//! Test systems with known invariants.
//!
//! Every problem supplies its right-hand side, a vector of conserved
//! quantities `G`, the Jacobian `∇G` (one row per invariant) and, where
//! available, the exact solution.

pub mod elliptic;
pub mod soliton;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use thiserror::Error;

pub use soliton::{Soliton, SolitonCount};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("{problem}: state outside the domain ({reason})")]
    Domain {
        problem: &'static str,
        reason: &'static str,
    },
    #[error("unknown problem `{0}`")]
    Unknown(String),
}

/// Conserved quantities of a system.
pub trait Invariants {
    fn invariant_count(&self) -> usize;
    fn invariants(&self, u: &[f64]) -> Result<Vec<f64>, ProblemError>;
    /// `ℓ × m` matrix whose row `i` is `∇G_i(u)`.
    fn invariant_gradients(&self, u: &[f64]) -> Result<DMatrix<f64>, ProblemError>;
}

pub trait OdeProblem: Invariants + Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn initial_time(&self) -> f64 {
        0.0
    }
    fn initial_state(&self) -> Vec<f64>;
    fn rhs(&self, t: f64, u: &[f64], du: &mut [f64]) -> Result<(), ProblemError>;
    fn exact(&self, _t: f64) -> Option<Vec<f64>> {
        None
    }
}

/// A subset of another object's invariants, in the given order.
pub struct Selected<'a, I: ?Sized> {
    inner: &'a I,
    indices: Vec<usize>,
}

impl<'a, I: Invariants + ?Sized> Selected<'a, I> {
    /// Panics if an index is out of range.
    pub fn new(inner: &'a I, indices: &[usize]) -> Self {
        let count = inner.invariant_count();
        assert!(
            indices.iter().all(|&i| i < count),
            "invariant index out of range (have {count})"
        );
        Selected {
            inner,
            indices: indices.to_vec(),
        }
    }

    pub fn all(inner: &'a I) -> Self {
        let indices = (0..inner.invariant_count()).collect();
        Selected { inner, indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

impl<I: Invariants + ?Sized> Invariants for Selected<'_, I> {
    fn invariant_count(&self) -> usize {
        self.indices.len()
    }

    fn invariants(&self, u: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let all = self.inner.invariants(u)?;
        Ok(self.indices.iter().map(|&i| all[i]).collect())
    }

    fn invariant_gradients(&self, u: &[f64]) -> Result<DMatrix<f64>, ProblemError> {
        Ok(self.inner.invariant_gradients(u)?.select_rows(&self.indices))
    }
}

/// Euler's equations for a free rigid body,
/// `u' = ((α-β) u2 u3, (1-α) u3 u1, (β-1) u1 u2)`.
#[derive(Debug, Clone)]
pub struct RigidBody {
    pub alpha: f64,
    pub beta: f64,
}

/// Parameter of the Jacobi functions in the exact rigid-body solution.
pub const RIGID_BODY_PARAMETER: f64 = 0.51;

impl Default for RigidBody {
    fn default() -> Self {
        let s = 1.51f64.sqrt();
        RigidBody {
            alpha: 1.0 + 1.0 / s,
            beta: 1.0 - 0.51 / s,
        }
    }
}

impl Invariants for RigidBody {
    fn invariant_count(&self) -> usize {
        2
    }

    fn invariants(&self, u: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let (a, b, c) = (u[0] * u[0], u[1] * u[1], u[2] * u[2]);
        Ok(vec![a + b + c, a + self.beta * b + self.alpha * c])
    }

    fn invariant_gradients(&self, u: &[f64]) -> Result<DMatrix<f64>, ProblemError> {
        Ok(DMatrix::from_row_slice(
            2,
            3,
            &[
                2.0 * u[0],
                2.0 * u[1],
                2.0 * u[2],
                2.0 * u[0],
                2.0 * self.beta * u[1],
                2.0 * self.alpha * u[2],
            ],
        ))
    }
}

impl OdeProblem for RigidBody {
    fn name(&self) -> &str {
        "rigid-body"
    }

    fn dim(&self) -> usize {
        3
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![0.0, 1.0, 1.0]
    }

    fn rhs(&self, _t: f64, u: &[f64], du: &mut [f64]) -> Result<(), ProblemError> {
        du[0] = (self.alpha - self.beta) * u[1] * u[2];
        du[1] = (1.0 - self.alpha) * u[2] * u[0];
        du[2] = (self.beta - 1.0) * u[0] * u[1];
        Ok(())
    }

    fn exact(&self, t: f64) -> Option<Vec<f64>> {
        let (sn, cn, dn) = elliptic::jacobi_sn_cn_dn(t, RIGID_BODY_PARAMETER);
        Some(vec![1.51f64.sqrt() * sn, cn, dn])
    }
}

/// Three-species Lotka-Volterra system with two Casimir invariants.
#[derive(Debug, Clone)]
pub struct LotkaVolterra {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub u0: [f64; 3],
}

impl Default for LotkaVolterra {
    fn default() -> Self {
        LotkaVolterra {
            a: -1.0,
            b: -1.0,
            c: -1.0,
            lambda: 0.0,
            mu: 1.0,
            nu: -1.0,
            u0: [1.0, 1.9, 0.5],
        }
    }
}

impl LotkaVolterra {
    fn check(u: &[f64]) -> Result<(), ProblemError> {
        if u.iter().take(3).all(|&x| x > 0.0) {
            Ok(())
        } else {
            Err(ProblemError::Domain {
                problem: "lotka-volterra",
                reason: "non-positive population",
            })
        }
    }
}

impl Invariants for LotkaVolterra {
    fn invariant_count(&self) -> usize {
        2
    }

    fn invariants(&self, u: &[f64]) -> Result<Vec<f64>, ProblemError> {
        Self::check(u)?;
        let (a, b) = (self.a, self.b);
        let (l1, l2, l3) = (u[0].ln(), u[1].ln(), u[2].ln());
        Ok(vec![
            a * b * l1 - b * l2 + l3,
            a * b * u[0] + u[1] - a * u[2] + self.nu * l2 - self.mu * l3,
        ])
    }

    fn invariant_gradients(&self, u: &[f64]) -> Result<DMatrix<f64>, ProblemError> {
        Self::check(u)?;
        let (a, b) = (self.a, self.b);
        Ok(DMatrix::from_row_slice(
            2,
            3,
            &[
                a * b / u[0],
                -b / u[1],
                1.0 / u[2],
                a * b,
                1.0 + self.nu / u[1],
                -a - self.mu / u[2],
            ],
        ))
    }
}

impl OdeProblem for LotkaVolterra {
    fn name(&self) -> &str {
        "lotka-volterra"
    }

    fn dim(&self) -> usize {
        3
    }

    fn initial_state(&self) -> Vec<f64> {
        self.u0.to_vec()
    }

    fn rhs(&self, _t: f64, u: &[f64], du: &mut [f64]) -> Result<(), ProblemError> {
        du[0] = u[0] * (self.c * u[1] + u[2] + self.lambda);
        du[1] = u[1] * (u[0] + self.a * u[2] + self.mu);
        du[2] = u[2] * (self.b * u[0] + u[1] + self.nu);
        Ok(())
    }
}

fn radius(problem: &'static str, u: &[f64]) -> Result<f64, ProblemError> {
    let r = u[0].hypot(u[1]);
    if r > 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(ProblemError::Domain {
            problem,
            reason: "position at the origin",
        })
    }
}

/// Planar two-body problem `q'' = -q/|q|^3` in the state `(q1, q2, p1, p2)`,
/// with energy, angular momentum and the norm of the Laplace-Runge-Lenz vector.
#[derive(Debug, Clone)]
pub struct Kepler {
    pub eccentricity: f64,
}

impl Default for Kepler {
    fn default() -> Self {
        Kepler { eccentricity: 0.5 }
    }
}

impl Kepler {
    /// Laplace-Runge-Lenz vector (its out-of-plane component is zero).
    pub fn lrl_vector(u: &[f64]) -> Result<[f64; 2], ProblemError> {
        let r = radius("kepler", u)?;
        let l = u[0] * u[3] - u[1] * u[2];
        Ok([u[3] * l - u[0] / r, -u[2] * l - u[1] / r])
    }
}

fn kepler_initial_state(e: f64) -> Vec<f64> {
    vec![1.0 - e, 0.0, 0.0, ((1.0 + e) / (1.0 - e)).sqrt()]
}

impl Invariants for Kepler {
    fn invariant_count(&self) -> usize {
        3
    }

    fn invariants(&self, u: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let r = radius("kepler", u)?;
        let h = 0.5 * (u[2] * u[2] + u[3] * u[3]) - 1.0 / r;
        let l = u[0] * u[3] - u[1] * u[2];
        let v = Self::lrl_vector(u)?;
        Ok(vec![h, l, v[0].hypot(v[1])])
    }

    fn invariant_gradients(&self, u: &[f64]) -> Result<DMatrix<f64>, ProblemError> {
        let r = radius("kepler", u)?;
        let (q1, q2, p1, p2) = (u[0], u[1], u[2], u[3]);
        let r3 = r * r * r;
        let l = q1 * p2 - q2 * p1;
        let v = Self::lrl_vector(u)?;
        let a = v[0].hypot(v[1]);
        if a == 0.0 {
            return Err(ProblemError::Domain {
                problem: "kepler",
                reason: "circular orbit, LRL vector vanishes",
            });
        }
        let dv1 = [
            p2 * p2 - 1.0 / r + q1 * q1 / r3,
            -p1 * p2 + q1 * q2 / r3,
            -p2 * q2,
            l + p2 * q1,
        ];
        let dv2 = [
            -p1 * p2 + q1 * q2 / r3,
            p1 * p1 - 1.0 / r + q2 * q2 / r3,
            -l + p1 * q2,
            -p1 * q1,
        ];
        let mut g = DMatrix::zeros(3, 4);
        let dh = [q1 / r3, q2 / r3, p1, p2];
        let dl = [p2, -p1, -q2, q1];
        for j in 0..4 {
            g[(0, j)] = dh[j];
            g[(1, j)] = dl[j];
            g[(2, j)] = (v[0] * dv1[j] + v[1] * dv2[j]) / a;
        }
        Ok(g)
    }
}

impl OdeProblem for Kepler {
    fn name(&self) -> &str {
        "kepler"
    }

    fn dim(&self) -> usize {
        4
    }

    fn initial_state(&self) -> Vec<f64> {
        kepler_initial_state(self.eccentricity)
    }

    fn rhs(&self, _t: f64, u: &[f64], du: &mut [f64]) -> Result<(), ProblemError> {
        let r = radius("kepler", u)?;
        let k = 1.0 / (r * r * r);
        du[0] = u[2];
        du[1] = u[3];
        du[2] = -k * u[0];
        du[3] = -k * u[1];
        Ok(())
    }

    /// Orbit with unit semi-major axis starting at pericentre; the mean
    /// anomaly equals `t`, and Kepler's equation is solved by Newton's method.
    fn exact(&self, t: f64) -> Option<Vec<f64>> {
        let e = self.eccentricity;
        let m = t - 2.0 * PI * (t / (2.0 * PI)).round();
        let mut big_e = if e > 0.8 { PI * m.signum() } else { m };
        for _ in 0..50 {
            let step = (big_e - e * big_e.sin() - m) / (1.0 - e * big_e.cos());
            big_e -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (s, c) = big_e.sin_cos();
        let w = (1.0 - e * e).sqrt();
        let den = 1.0 - e * c;
        Some(vec![c - e, w * s, -s / den, w * c / den])
    }
}

/// Kepler problem with the perturbation `p' = -q/r^3 - μ q/r^5`, conserving
/// `H = |p|^2/2 - 1/r - μ/(3 r^3)` and angular momentum.
#[derive(Debug, Clone)]
pub struct PerturbedKepler {
    pub eccentricity: f64,
    pub mu: f64,
}

impl Default for PerturbedKepler {
    fn default() -> Self {
        PerturbedKepler {
            eccentricity: 0.6,
            mu: 0.005,
        }
    }
}

impl Invariants for PerturbedKepler {
    fn invariant_count(&self) -> usize {
        2
    }

    fn invariants(&self, u: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let r = radius("perturbed-kepler", u)?;
        let h = 0.5 * (u[2] * u[2] + u[3] * u[3]) - 1.0 / r - self.mu / (3.0 * r * r * r);
        Ok(vec![h, u[0] * u[3] - u[1] * u[2]])
    }

    fn invariant_gradients(&self, u: &[f64]) -> Result<DMatrix<f64>, ProblemError> {
        let r = radius("perturbed-kepler", u)?;
        let r2 = r * r;
        let k = 1.0 / (r2 * r) + self.mu / (r2 * r2 * r);
        Ok(DMatrix::from_row_slice(
            2,
            4,
            &[k * u[0], k * u[1], u[2], u[3], u[3], -u[2], -u[1], u[0]],
        ))
    }
}

impl OdeProblem for PerturbedKepler {
    fn name(&self) -> &str {
        "perturbed-kepler"
    }

    fn dim(&self) -> usize {
        4
    }

    fn initial_state(&self) -> Vec<f64> {
        kepler_initial_state(self.eccentricity)
    }

    fn rhs(&self, _t: f64, u: &[f64], du: &mut [f64]) -> Result<(), ProblemError> {
        let r = radius("perturbed-kepler", u)?;
        let r2 = r * r;
        let k = 1.0 / (r2 * r) * (1.0 + self.mu / r2);
        du[0] = u[2];
        du[1] = u[3];
        du[2] = -k * u[0];
        du[3] = -k * u[1];
        Ok(())
    }
}

/// `u' = (u2, -u1)`, conserving `|u|^2`.
#[derive(Debug, Clone, Default)]
pub struct HarmonicOscillator;

impl Invariants for HarmonicOscillator {
    fn invariant_count(&self) -> usize {
        1
    }

    fn invariants(&self, u: &[f64]) -> Result<Vec<f64>, ProblemError> {
        Ok(vec![u[0] * u[0] + u[1] * u[1]])
    }

    fn invariant_gradients(&self, u: &[f64]) -> Result<DMatrix<f64>, ProblemError> {
        Ok(DMatrix::from_row_slice(1, 2, &[2.0 * u[0], 2.0 * u[1]]))
    }
}

impl OdeProblem for HarmonicOscillator {
    fn name(&self) -> &str {
        "harmonic-oscillator"
    }

    fn dim(&self) -> usize {
        2
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![1.0, 0.0]
    }

    fn rhs(&self, _t: f64, u: &[f64], du: &mut [f64]) -> Result<(), ProblemError> {
        du[0] = u[1];
        du[1] = -u[0];
        Ok(())
    }

    fn exact(&self, t: f64) -> Option<Vec<f64>> {
        Some(vec![t.cos(), -t.sin()])
    }
}

pub const PROBLEM_NAMES: [&str; 5] = [
    "rigid-body",
    "lotka-volterra",
    "kepler",
    "perturbed-kepler",
    "harmonic-oscillator",
];

/// Problem with default parameters by name.
pub fn by_name(name: &str) -> Result<Box<dyn OdeProblem>, ProblemError> {
    Ok(match name {
        "rigid-body" => Box::new(RigidBody::default()),
        "lotka-volterra" => Box::new(LotkaVolterra::default()),
        "kepler" => Box::new(Kepler::default()),
        "perturbed-kepler" => Box::new(PerturbedKepler::default()),
        "harmonic-oscillator" => Box::new(HarmonicOscillator),
        other => return Err(ProblemError::Unknown(other.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rigid_body_values() {
        let p = RigidBody::default();
        let g = p.invariants(&p.initial_state()).unwrap();
        assert_eq!(g[0], 2.0);
        assert!(close(g[1], 2.0 + 0.49 / 1.51f64.sqrt(), 1e-15));
        assert!(close(g[1], 2.398_756_3, 1e-7));
        assert_eq!(p.exact(0.0).unwrap(), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn lotka_volterra_values() {
        let p = LotkaVolterra::default();
        let g = p.invariants(&p.initial_state()).unwrap();
        assert!(close(g[0], 1.9f64.ln() + 0.5f64.ln(), 1e-15));
        assert!(close(g[0], -0.051_293, 1e-6));
        assert!(close(g[1], 3.4 - 1.9f64.ln() - 0.5f64.ln(), 1e-15));
        assert!(close(g[1], 3.451_293, 1e-6));
        assert_eq!(p.nu, p.mu * p.b - p.lambda * p.a * p.b);
        assert!(matches!(
            p.invariants(&[1.0, 0.0, 1.0]),
            Err(ProblemError::Domain { .. })
        ));
        assert!(p.invariant_gradients(&[-1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn kepler_values() {
        let p = Kepler::default();
        let g = p.invariants(&p.initial_state()).unwrap();
        assert!(close(g[0], -0.5, 1e-15));
        assert!(close(g[1], 0.5 * 3f64.sqrt(), 1e-15));
        assert!(close(g[2], 0.5, 1e-15));
        let mut du = [0.0; 4];
        assert!(p.rhs(0.0, &[0.0, 0.0, 1.0, 1.0], &mut du).is_err());
        assert!(p.invariants(&[0.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn perturbed_kepler_values() {
        let p = PerturbedKepler::default();
        let u0 = p.initial_state();
        let g = p.invariants(&u0).unwrap();
        assert!(close(g[1], 0.8, 1e-15));
        // 2 - 2.5 - 0.005 / (3 * 0.064)
        assert!(close(g[0], -0.526_041_666_666_666_6, 1e-15));

        let unperturbed = PerturbedKepler { mu: 0.0, ..p.clone() };
        let k = Kepler { eccentricity: 0.6 };
        let u = [0.3, -0.7, 0.2, 1.1];
        let (mut a, mut b) = ([0.0; 4], [0.0; 4]);
        unperturbed.rhs(0.0, &u, &mut a).unwrap();
        k.rhs(0.0, &u, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn kepler_exact_solution() {
        let p = Kepler::default();
        let u0 = p.exact(0.0).unwrap();
        for (a, b) in u0.iter().zip(p.initial_state()) {
            assert!(close(*a, b, 1e-15));
        }
        // Period 2π, and the solution satisfies the ODE.
        let u = p.exact(2.0 * PI).unwrap();
        assert!(close(u[0], 0.5, 1e-13));
        let h = 1e-5;
        for i in 0..40 {
            let t = 0.37 * i as f64;
            let (up, um) = (p.exact(t + h).unwrap(), p.exact(t - h).unwrap());
            let mut f = [0.0; 4];
            p.rhs(t, &p.exact(t).unwrap(), &mut f).unwrap();
            for j in 0..4 {
                assert!(close((up[j] - um[j]) / (2.0 * h), f[j], 1e-8));
            }
        }
    }

    fn exact_invariants_constant(p: &dyn OdeProblem, horizon: f64) {
        let g0 = p.invariants(&p.initial_state()).unwrap();
        for i in 0..1000 {
            let t = horizon * i as f64 / 999.0;
            let g = p.invariants(&p.exact(t).unwrap()).unwrap();
            for (a, b) in g.iter().zip(&g0) {
                assert!(close(*a, *b, 1e-12), "{} at t={t}: {a} vs {b}", p.name());
            }
        }
    }

    #[test]
    fn invariants_constant_along_exact_solutions() {
        exact_invariants_constant(&RigidBody::default(), 100.0);
        exact_invariants_constant(&Kepler::default(), 100.0);
        exact_invariants_constant(&HarmonicOscillator, 100.0);
    }

    #[test]
    fn rigid_body_exact_solves_the_ode() {
        let p = RigidBody::default();
        let h = 1e-5;
        for i in 0..100 {
            let t = 0.5 * i as f64;
            let u = p.exact(t).unwrap();
            let (up, um) = (p.exact(t + h).unwrap(), p.exact(t - h).unwrap());
            let mut f = [0.0; 3];
            p.rhs(t, &u, &mut f).unwrap();
            for j in 0..3 {
                assert!(close((up[j] - um[j]) / (2.0 * h), f[j], 1e-8));
            }
        }
    }

    #[test]
    fn selection() {
        let p = Kepler::default();
        let u = p.initial_state();
        let s = Selected::new(&p, &[2, 0]);
        assert_eq!(s.invariant_count(), 2);
        let all = p.invariants(&u).unwrap();
        assert_eq!(s.invariants(&u).unwrap(), vec![all[2], all[0]]);
        let g = s.invariant_gradients(&u).unwrap();
        let full = p.invariant_gradients(&u).unwrap();
        assert_eq!(g.row(0), full.row(2));
        assert_eq!(Selected::all(&p).indices(), &[0, 1, 2]);
    }

    #[test]
    fn lookup() {
        for name in PROBLEM_NAMES {
            assert_eq!(by_name(name).unwrap().name(), name);
        }
        assert!(matches!(by_name("pendulum"), Err(ProblemError::Unknown(_))));
    }

    fn check_gradient(p: &dyn OdeProblem, u: &[f64]) -> Result<(), TestCaseError> {
        let g = p.invariant_gradients(u).unwrap();
        for j in 0..p.dim() {
            let h = 1e-6 * u[j].abs().max(1.0);
            let (mut up, mut um) = (u.to_vec(), u.to_vec());
            up[j] += h;
            um[j] -= h;
            let (gp, gm) = (p.invariants(&up).unwrap(), p.invariants(&um).unwrap());
            for i in 0..p.invariant_count() {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                let scale = g[(i, j)].abs().max(1.0);
                prop_assert!(
                    (fd - g[(i, j)]).abs() <= 1e-6 * scale,
                    "{} dG{}/du{}: fd {fd} vs {}",
                    p.name(),
                    i,
                    j,
                    g[(i, j)]
                );
            }
        }
        Ok(())
    }

    fn check_conservation(p: &dyn OdeProblem, u: &[f64]) -> Result<(), TestCaseError> {
        let g = p.invariant_gradients(u).unwrap();
        let mut f = vec![0.0; p.dim()];
        p.rhs(0.0, u, &mut f).unwrap();
        for i in 0..p.invariant_count() {
            let dot: f64 = (0..p.dim()).map(|j| g[(i, j)] * f[j]).sum();
            let scale: f64 = (0..p.dim()).map(|j| (g[(i, j)] * f[j]).abs()).sum::<f64>().max(1.0);
            prop_assert!(dot.abs() <= 1e-10 * scale, "{} G{i}: {dot}", p.name());
        }
        Ok(())
    }

    fn planar_state() -> impl Strategy<Value = Vec<f64>> {
        (0.3f64..2.0, -PI..PI, -1.5f64..1.5, -1.5f64..1.5)
            .prop_map(|(r, th, p1, p2)| vec![r * th.cos(), r * th.sin(), p1, p2])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn rigid_body_gradients(u in prop::collection::vec(-2.0f64..2.0, 3)) {
            let p = RigidBody::default();
            check_gradient(&p, &u)?;
            check_conservation(&p, &u)?;
        }

        #[test]
        fn lotka_volterra_gradients(u in prop::collection::vec(0.1f64..3.0, 3)) {
            let p = LotkaVolterra::default();
            check_gradient(&p, &u)?;
            check_conservation(&p, &u)?;
        }

        #[test]
        fn kepler_gradients(u in planar_state()) {
            let p = Kepler::default();
            check_gradient(&p, &u)?;
            check_conservation(&p, &u)?;
        }

        #[test]
        fn perturbed_kepler_gradients(u in planar_state()) {
            let p = PerturbedKepler::default();
            check_gradient(&p, &u)?;
            check_conservation(&p, &u)?;
        }
    }
}
