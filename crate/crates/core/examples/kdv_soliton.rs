//! One soliton with the ARK3 pair, with and without energy relaxation.

use mrrk::kdv::{run_kdv, KdvConfig, RelaxMode};
use mrrk::problems::SolitonCount;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for relax in [RelaxMode::Off, RelaxMode::Energy] {
        let cfg = KdvConfig {
            tf: 5.0,
            relax,
            ..KdvConfig::standard(SolitonCount::One)
        };
        let run = run_kdv(&cfg)?;
        let [m, e, w] = run.summary.max_eta_dev;
        println!(
            "{:<6} steps {}  mass {m:.1e}  energy {e:.1e}  Whitham {w:.1e}  error {:.2e}",
            relax.as_str(),
            run.summary.steps,
            run.summary.final_error
        );
    }
    Ok(())
}
