//! Observed order of RK(4,4) and its relaxed version on the rigid body.

use mrrk::experiments::{run_experiment, ExperimentConfig, ExperimentKind, Relax};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::new("rk44-convergence", ExperimentKind::Convergence);
    cfg.problem = Some("rigid-body".into());
    cfg.method = Some("RK(4,4)".into());
    cfg.dts = (0..5).map(|k| 0.1 / f64::powi(2.0, k)).collect();
    cfg.tf = Some(5.0);
    cfg.relax = Relax::On;
    let out = run_experiment(&cfg)?;
    print!("{}", String::from_utf8(out.csv)?);
    for (name, value) in out.metrics.iter() {
        println!("{name} = {value:.3}");
    }
    Ok(())
}
