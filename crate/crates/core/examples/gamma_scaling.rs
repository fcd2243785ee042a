//! Size of the relaxation parameters of a single step as Δt shrinks.

use mrrk::problems::RigidBody;
use mrrk::relaxation::{gamma_scaling_probe, SolverConfig};
use mrrk::tableaux::embedded_set;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = RigidBody::default();
    let dts: Vec<f64> = (0..6).map(|k| 0.1 / f64::powi(2.0, k)).collect();
    let cfg = SolverConfig {
        allow_inexact: true,
        ..SolverConfig::default()
    };
    for name in ["Heun(3,3)", "RK(4,4)", "DP(7,5)"] {
        let set = embedded_set(name)?.leading(2)?;
        let gammas = gamma_scaling_probe(&p, &set, &dts, &cfg)?;
        let row: Vec<String> = gammas.iter().map(|g| format!("{g:.1e}")).collect();
        println!("{name:<10} {}", row.join(" "));
    }
    Ok(())
}
