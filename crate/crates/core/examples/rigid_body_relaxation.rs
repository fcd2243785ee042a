//! Heun(3,3) on the rigid body with both quadratic invariants enforced.

use mrrk::problems::{Invariants, OdeProblem, RigidBody};
use mrrk::relaxation::{relaxed_integrate, SolverConfig};
use mrrk::stepper::fixed_grid_integrate;
use mrrk::tableaux::embedded_set;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = RigidBody::default();
    let set = embedded_set("Heun(3,3)")?;
    let (dt, tf) = (0.04, 50.0);
    let g0 = p.invariants(&p.initial_state())?;

    let base = fixed_grid_integrate(&p, &set, dt, tf)?;
    let run = relaxed_integrate(&p, &set.leading(2)?, dt, tf, &[0, 1], &SolverConfig::default())?;

    for (label, t, u) in [
        ("baseline", *base.times.last().unwrap(), base.states.last().unwrap()),
        ("relaxed", *run.times.last().unwrap(), run.states.last().unwrap()),
    ] {
        let g = p.invariants(u)?;
        let exact = p.exact(t).unwrap();
        let err = u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "{label:<8} t = {t:.4}  dG1 = {:.1e}  dG2 = {:.1e}  error = {err:.2e}",
            g[0] - g0[0],
            g[1] - g0[1]
        );
    }
    let last = run.gammas.last().unwrap();
    println!("last step gamma = ({:.2e}, {:.2e})", last[0], last[1]);
    Ok(())
}
