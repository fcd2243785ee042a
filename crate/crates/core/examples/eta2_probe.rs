//! How well the discrete Whitham functional is conserved by the exact
//! soliton solutions themselves.

use mrrk::kdv::{eta2_drift_probe, KdvConfig};
use mrrk::problems::SolitonCount;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for count in [SolitonCount::One, SolitonCount::Two, SolitonCount::Three] {
        let cfg = KdvConfig::standard(count);
        let p = cfg.problem()?;
        let rate = eta2_drift_probe(&p, cfg.t0, cfg.tf, 201);
        println!("{} soliton(s), N = {}: max |d eta2/dt| = {rate:.2e}", count.count(), cfg.n);
    }
    Ok(())
}
