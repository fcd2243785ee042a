//! Tight-tolerance adaptive reference for the Lotka-Volterra system, which
//! has no closed-form solution.

use mrrk::problems::{Invariants, LotkaVolterra, OdeProblem};
use mrrk::reference::{solve_reference, MIN_TOLERANCE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = LotkaVolterra::default();
    let r = solve_reference(&p, 100.0, MIN_TOLERANCE, MIN_TOLERANCE)?;
    let s = r.stats();
    println!("accepted {} rejected {} rhs evaluations {}", s.accepted, s.rejected, s.rhs_evaluations);
    let g0 = p.invariants(&p.initial_state())?;
    for t in [10.0, 37.5, 100.0] {
        let u = r.evaluate(t)?;
        let g = p.invariants(&u)?;
        println!("t = {t:>5}: u = {u:.6?}  dG = ({:.1e}, {:.1e})", g[0] - g0[0], g[1] - g0[1]);
    }
    Ok(())
}
