//! Soliton runs with and without relaxation.

use std::io::Write;
use std::str::FromStr;

use super::{imex_step, KdvError, KdvProblem, KdvSemiDiscretization, SpectralGrid};
use crate::problems::{OdeProblem, Selected, Soliton, SolitonCount};
use crate::relaxation::{relaxed_integrate_with, SolverConfig};
use crate::stepper::step_grid;
use crate::tableaux::ark_pair;

/// Which nonlinear invariants relaxation enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxMode {
    Off,
    /// `η₁` with one relaxation parameter along `b¹`.
    Energy,
    /// `η₁` and `η₂` along `b¹` and `b²`, accepting inexact solves.
    EnergyWhitham,
}

impl RelaxMode {
    pub fn selector(self) -> &'static [usize] {
        match self {
            RelaxMode::Off => &[],
            RelaxMode::Energy => &[1],
            RelaxMode::EnergyWhitham => &[1, 2],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelaxMode::Off => "off",
            RelaxMode::Energy => "energy",
            RelaxMode::EnergyWhitham => "energy+whitham",
        }
    }
}

impl FromStr for RelaxMode {
    type Err = KdvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" | "none" | "baseline" => Ok(RelaxMode::Off),
            "energy" => Ok(RelaxMode::Energy),
            "energy+whitham" => Ok(RelaxMode::EnergyWhitham),
            other => Err(KdvError::Config(format!("unknown relaxation mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdvConfig {
    pub solitons: SolitonCount,
    pub n: usize,
    pub domain: (f64, f64),
    pub dt: f64,
    pub t0: f64,
    pub tf: f64,
    pub method: String,
    pub relax: RelaxMode,
    pub solver: SolverConfig,
}

impl KdvConfig {
    /// Grid and time interval used for each soliton count.
    pub fn standard(solitons: SolitonCount) -> Self {
        let (n, domain, t0, tf) = match solitons {
            SolitonCount::One => (512, (-20.0, 60.0), 0.0, 20.0),
            SolitonCount::Two => (1024, (-80.0, 80.0), -25.0, 25.0),
            SolitonCount::Three => (1536, (-130.0, 130.0), -50.0, 50.0),
        };
        KdvConfig {
            solitons,
            n,
            domain,
            dt: 0.1,
            t0,
            tf,
            method: "ARK3(2)4L[2]SA".into(),
            relax: RelaxMode::Off,
            solver: SolverConfig::default(),
        }
    }

    pub fn problem(&self) -> Result<KdvProblem, KdvError> {
        let grid = SpectralGrid::new(self.n, self.domain.0, self.domain.1)?;
        Ok(KdvProblem::new(
            KdvSemiDiscretization::new(grid),
            Soliton::new(self.solitons),
            self.t0,
        ))
    }
}

/// One output row per accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct KdvRow {
    pub t: f64,
    /// Max-norm error against the exact soliton at `t`.
    pub error: f64,
    /// `η_i(t) - η_i(t0)`.
    pub eta_dev: [f64; 3],
    pub gamma: Vec<f64>,
    /// Max-norm relaxation residual of the step ending at `t`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdvSummary {
    pub max_eta_dev: [f64; 3],
    pub final_error: f64,
    pub steps: usize,
    pub inexact_steps: usize,
    pub fallback_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdvRun {
    pub config: KdvConfig,
    pub rows: Vec<KdvRow>,
    pub summary: KdvSummary,
}

pub fn run_kdv(cfg: &KdvConfig) -> Result<KdvRun, KdvError> {
    if !(cfg.dt > 0.0) {
        return Err(KdvError::Config(format!("step size must be positive, got {}", cfg.dt)));
    }
    let problem = cfg.problem()?;
    let pair = ark_pair(&cfg.method)?;
    let semi = &problem.semi;
    let eta_start = semi.invariants(&problem.initial_state());

    let row_for = |t: f64, u: &[f64], gamma: Vec<f64>, residual: f64| -> Result<KdvRow, KdvError> {
        if u.iter().any(|v| !v.is_finite()) {
            return Err(KdvError::NonFinite { t });
        }
        let exact = problem.soliton.sample(problem.points(), t);
        let error = u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let eta = semi.invariants(u);
        Ok(KdvRow {
            t,
            error,
            eta_dev: [eta[0] - eta_start[0], eta[1] - eta_start[1], eta[2] - eta_start[2]],
            gamma,
            residual,
        })
    };

    let mut rows = Vec::new();
    let (mut inexact_steps, mut fallback_steps) = (0, 0);
    match cfg.relax {
        RelaxMode::Off => {
            let grid = step_grid(cfg.t0, cfg.dt, cfg.tf);
            let mut u = problem.initial_state();
            rows.push(row_for(cfg.t0, &u, Vec::new(), 0.0)?);
            for w in grid.windows(2) {
                u = imex_step(semi, &pair, w[0], &u, w[1] - w[0])?.update;
                rows.push(row_for(w[1], &u, Vec::new(), 0.0)?);
            }
        }
        mode => {
            let selector = mode.selector();
            let pair = pair.leading(selector.len())?;
            let invariants = Selected::new(&problem, selector);
            let mut solver = cfg.solver.clone();
            solver.allow_inexact |= mode == RelaxMode::EnergyWhitham;
            let run = relaxed_integrate_with(
                &invariants,
                |t, u, h| {
                    let r = imex_step(semi, &pair, t, u, h)?;
                    if r.update.iter().any(|v| !v.is_finite()) {
                        return Err(crate::stepper::StepError::Solve {
                            stage: pair.stages(),
                            t,
                            msg: "non-finite update".into(),
                        });
                    }
                    Ok(r)
                },
                cfg.t0,
                problem.initial_state(),
                cfg.dt,
                cfg.tf,
                &solver,
            )?;
            inexact_steps = run.inexact_steps;
            fallback_steps = run.fallback_steps;
            rows.push(row_for(run.times[0], &run.states[0], vec![0.0; selector.len()], 0.0)?);
            for i in 1..run.times.len() {
                let residual = run.residuals[i - 1].iter().fold(0.0, |m: f64, v| m.max(v.abs()));
                rows.push(row_for(run.times[i], &run.states[i], run.gammas[i - 1].clone(), residual)?);
            }
        }
    }

    let mut max_eta_dev = [0.0f64; 3];
    for r in &rows {
        for i in 0..3 {
            max_eta_dev[i] = max_eta_dev[i].max(r.eta_dev[i].abs());
        }
    }
    let summary = KdvSummary {
        max_eta_dev,
        final_error: rows.last().map_or(0.0, |r| r.error),
        steps: rows.len() - 1,
        inexact_steps,
        fallback_steps,
    };
    Ok(KdvRun {
        config: cfg.clone(),
        rows,
        summary,
    })
}

/// Columns `t, error, eta0_dev, eta1_dev, eta2_dev, gamma1.., residual`.
pub fn write_kdv_csv<W: Write>(run: &KdvRun, out: W) -> csv::Result<()> {
    let l = run.config.relax.selector().len();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["t", "error", "eta0_dev", "eta1_dev", "eta2_dev"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=l).map(|k| format!("gamma{k}")));
    header.push("residual".into());
    w.write_record(&header)?;
    for r in &run.rows {
        let mut rec = vec![
            format!("{:e}", r.t),
            format!("{:e}", r.error),
            format!("{:e}", r.eta_dev[0]),
            format!("{:e}", r.eta_dev[1]),
            format!("{:e}", r.eta_dev[2]),
        ];
        rec.extend(r.gamma.iter().map(|g| format!("{g:e}")));
        rec.push(format!("{:e}", r.residual));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(mode: RelaxMode) -> KdvConfig {
        KdvConfig {
            tf: 2.0,
            relax: mode,
            ..KdvConfig::standard(SolitonCount::One)
        }
    }

    #[test]
    fn modes_parse() {
        for m in [RelaxMode::Off, RelaxMode::Energy, RelaxMode::EnergyWhitham] {
            assert_eq!(m.as_str().parse::<RelaxMode>().unwrap(), m);
        }
        assert!("both".parse::<RelaxMode>().is_err());
    }

    #[test]
    fn energy_relaxation_conserves_eta1() {
        let run = run_kdv(&short(RelaxMode::Energy)).unwrap();
        assert!(run.summary.max_eta_dev[0] <= 1e-12);
        assert!(run.summary.max_eta_dev[1] <= 1e-12);
        assert!(run.rows.last().unwrap().t >= 2.0);
        let base = run_kdv(&short(RelaxMode::Off)).unwrap();
        assert!(base.summary.max_eta_dev[1] > 1e-6);
        assert_eq!(base.rows.last().unwrap().t, 2.0);
    }

    #[test]
    fn csv_layout() {
        let run = run_kdv(&KdvConfig {
            tf: 0.3,
            ..short(RelaxMode::EnergyWhitham)
        })
        .unwrap();
        let mut buf = Vec::new();
        write_kdv_csv(&run, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,error,eta0_dev,eta1_dev,eta2_dev,gamma1,gamma2,residual"
        );
        assert_eq!(lines.count(), run.rows.len());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = short(RelaxMode::Off);
        cfg.dt = 0.0;
        assert!(run_kdv(&cfg).is_err());
        cfg.dt = 0.1;
        cfg.method = "RK(4,4)".into();
        assert!(matches!(run_kdv(&cfg), Err(KdvError::Tableau(_))));
    }
}
