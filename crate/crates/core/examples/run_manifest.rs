//! A small manifest run in parallel, with bands checked in the summary.

use mrrk::experiments::{parse_manifest, run_all};

const MANIFEST: &str = "
id = lv-drift
kind = invariants
problem = lotka-volterra
method = RK(4,4)
dt = 0.1
tf = 100
relax = on
expect.relaxed_drift = ..1e-11
expect.baseline_drift = 1e-6..

id = kdv-structure
kind = kdv-structure
samples = 20
expect.skew_d1 = ..1e-10
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let entries = parse_manifest(MANIFEST)?;
    let (summary, _) = run_all(&entries, 2, None)?;
    for r in summary.rows.iter().filter(|r| r.is_check()) {
        println!(
            "{} {:<14} {:<16} {:.2e}",
            if r.pass { "PASS" } else { "FAIL" },
            r.id,
            r.metric,
            r.value.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
