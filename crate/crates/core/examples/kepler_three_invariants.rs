//! DP(7,5) on Kepler's problem conserving energy, angular momentum and the
//! Laplace-Runge-Lenz norm at once.

use mrrk::problems::{Invariants, Kepler, OdeProblem};
use mrrk::relaxation::{relaxed_integrate, SolverConfig};
use mrrk::tableaux::embedded_set;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = Kepler::default();
    let set = embedded_set("DP(7,5)")?;
    let run = relaxed_integrate(&p, &set, 0.1, 100.0, &[0, 1, 2], &SolverConfig::default())?;
    let g0 = p.invariants(&p.initial_state())?;
    let worst = run.states.iter().fold([0.0f64; 3], |mut w, u| {
        let g = p.invariants(u).unwrap();
        for i in 0..3 {
            w[i] = w[i].max((g[i] - g0[i]).abs());
        }
        w
    });
    println!("steps {}  max drift H {:.1e}  L {:.1e}  A {:.1e}", run.gammas.len(), worst[0], worst[1], worst[2]);
    let u = run.states.last().unwrap();
    let exact = p.exact(*run.times.last().unwrap()).unwrap();
    let err = u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("final error {err:.2e}");
    Ok(())
}
