//! Convergence, drift, error-growth and γ-scaling runs on the ODE problems.

use crate::problems::{by_name, OdeProblem};
use crate::reference::{solve_reference, ReferenceSolution, MIN_TOLERANCE};
use crate::relaxation::{gamma_scaling_probe, relaxed_integrate, RelaxedTrajectory};
use crate::stepper::{fixed_grid_integrate, Trajectory};
use crate::tableaux::{embedded_set, EmbeddedSet};

use super::fit::{growth_slope, loglog_slope, successive_orders};
use super::{fmt_opt, CsvTable, ExperimentConfig, ExperimentError, Metrics};

/// Exact solution, or a tight adaptive reference where none is known.
enum Truth<'a> {
    Exact(&'a dyn OdeProblem),
    Reference(ReferenceSolution),
}

impl Truth<'_> {
    fn at(&self, t: f64) -> Result<Vec<f64>, ExperimentError> {
        match self {
            Truth::Exact(p) => p
                .exact(t)
                .ok_or_else(|| ExperimentError::Config("exact solution unavailable".into())),
            Truth::Reference(r) => Ok(r.evaluate(t)?),
        }
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Setup {
    problem: Box<dyn OdeProblem>,
    set: EmbeddedSet,
    selector: Vec<usize>,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let name = cfg.problem.as_deref().ok_or_else(|| missing(cfg, "problem"))?;
        let problem = by_name(name)?;
        let method = cfg.method.as_deref().ok_or_else(|| missing(cfg, "method"))?;
        let set = embedded_set(method)?;
        let selector = cfg.relax.selector(problem.invariant_count())?;
        Ok(Setup {
            problem,
            set,
            selector,
        })
    }

    fn relaxed(&self) -> bool {
        !self.selector.is_empty()
    }

    fn truth(&self, horizon: f64) -> Result<Truth<'_>, ExperimentError> {
        let p = self.problem.as_ref();
        if p.exact(p.initial_time()).is_some() {
            Ok(Truth::Exact(p))
        } else {
            Ok(Truth::Reference(solve_reference(p, horizon, MIN_TOLERANCE, MIN_TOLERANCE)?))
        }
    }

    fn baseline(&self, dt: f64, tf: f64) -> Result<Trajectory, ExperimentError> {
        fixed_grid_integrate(self.problem.as_ref(), &self.set, dt, tf)
            .map_err(|e| ExperimentError::Run { dt, msg: e.to_string() })
    }

    fn relaxed_run(&self, cfg: &ExperimentConfig, dt: f64, tf: f64) -> Result<RelaxedTrajectory, ExperimentError> {
        let set = self.set.leading(self.selector.len())?;
        relaxed_integrate(self.problem.as_ref(), &set, dt, tf, &self.selector, &cfg.solver)
            .map_err(|e| ExperimentError::Run { dt, msg: e.to_string() })
    }

    /// Largest `|G_i(u) - G_i(u⁰)|` over the selected invariants, per state.
    fn deviations(&self, states: &[Vec<f64>], selector: &[usize]) -> Result<Vec<Vec<f64>>, ExperimentError> {
        let g0 = self.problem.invariants(&states[0])?;
        states
            .iter()
            .map(|u| {
                let g = self.problem.invariants(u)?;
                Ok(selector.iter().map(|&i| g[i] - g0[i]).collect())
            })
            .collect()
    }
}

fn missing(cfg: &ExperimentConfig, key: &str) -> ExperimentError {
    ExperimentError::Config(format!("{}: `{key}` is required", cfg.id))
}

fn single_dt(cfg: &ExperimentConfig) -> Result<f64, ExperimentError> {
    match cfg.dts.as_slice() {
        [dt] => Ok(*dt),
        [] => Err(missing(cfg, "dt")),
        _ => Err(ExperimentError::Config(format!("{}: expected a single dt", cfg.id))),
    }
}

fn final_time(cfg: &ExperimentConfig) -> Result<f64, ExperimentError> {
    cfg.tf.ok_or_else(|| missing(cfg, "tf"))
}

/// Fitted order over errors at or above `floor`.
fn fitted_order(dts: &[f64], errors: &[f64], floor: f64) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = dts
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e >= floor)
        .map(|(d, e)| (*d, *e))
        .unzip();
    loglog_slope(&x, &y)
}

/// Columns `dt, baseline_error[, baseline_order][, relaxed_error[, relaxed_order], relaxed_t, inexact_steps]`.
pub(super) fn convergence(cfg: &ExperimentConfig) -> Result<(CsvTable, Metrics), ExperimentError> {
    let setup = Setup::new(cfg)?;
    let tf = final_time(cfg)?;
    if cfg.dts.is_empty() {
        return Err(missing(cfg, "dt"));
    }
    let dt_max = cfg.dts.iter().cloned().fold(0.0, f64::max);
    let truth = setup.truth(tf + 4.0 * dt_max)?;
    let with_orders = cfg.dts.len() > 1;

    let mut base_err = Vec::new();
    let mut relax_err = Vec::new();
    let mut relax_end = Vec::new();
    for &dt in &cfg.dts {
        let run = setup.baseline(dt, tf)?;
        let (t, u) = run.last().expect("trajectory has the initial state");
        base_err.push(max_diff(u, &truth.at(t)?));
        if setup.relaxed() {
            let run = setup.relaxed_run(cfg, dt, tf)?;
            let (t, u) = (*run.times.last().unwrap(), run.states.last().unwrap());
            relax_err.push(max_diff(u, &truth.at(t)?));
            relax_end.push((t, run.inexact_steps));
        }
    }

    let mut header = vec!["dt", "baseline_error"];
    if with_orders {
        header.push("baseline_order");
    }
    if setup.relaxed() {
        header.push("relaxed_error");
        if with_orders {
            header.push("relaxed_order");
        }
        header.extend(["relaxed_t", "inexact_steps"]);
    }
    let mut table = CsvTable::new(&header);
    let base_orders = successive_orders(&base_err);
    let relax_orders = successive_orders(&relax_err);
    for (i, dt) in cfg.dts.iter().enumerate() {
        let order = |o: &[Option<f64>]| if i == 0 { String::new() } else { fmt_opt(o[i - 1]) };
        let mut row = vec![format!("{dt:e}"), format!("{:e}", base_err[i])];
        if with_orders {
            row.push(order(&base_orders));
        }
        if setup.relaxed() {
            row.push(format!("{:e}", relax_err[i]));
            if with_orders {
                row.push(order(&relax_orders));
            }
            row.push(format!("{:e}", relax_end[i].0));
            row.push(relax_end[i].1.to_string());
        }
        table.push(row);
    }

    let mut m = Metrics::default();
    m.put_opt("baseline_order", fitted_order(&cfg.dts, &base_err, cfg.order_floor));
    if setup.relaxed() {
        m.put_opt("relaxed_order", fitted_order(&cfg.dts, &relax_err, cfg.order_floor));
        let worst = relax_orders
            .iter()
            .zip(relax_err.iter().skip(1))
            .filter(|(_, e)| **e >= cfg.order_floor)
            .filter_map(|(o, _)| *o)
            .fold(f64::INFINITY, f64::min);
        m.put_opt("relaxed_min_successive_order", worst.is_finite().then_some(worst));
        m.put("inexact_steps", relax_end.iter().map(|r| r.1).sum::<usize>() as f64);
    }
    Ok((table, m))
}

struct Runs {
    baseline: Trajectory,
    relaxed: Option<RelaxedTrajectory>,
}

fn both_runs(setup: &Setup, cfg: &ExperimentConfig, dt: f64, tf: f64) -> Result<Runs, ExperimentError> {
    let baseline = setup.baseline(dt, tf)?;
    let relaxed = if setup.relaxed() {
        Some(setup.relaxed_run(cfg, dt, tf)?)
    } else {
        None
    };
    Ok(Runs { baseline, relaxed })
}

/// Long format `variant, t, G<i>_dev...`; the first row of each variant is zero.
pub(super) fn invariant_drift(cfg: &ExperimentConfig) -> Result<(CsvTable, Metrics), ExperimentError> {
    let setup = Setup::new(cfg)?;
    let (dt, tf) = (single_dt(cfg)?, final_time(cfg)?);
    let shown: Vec<usize> = if setup.relaxed() {
        setup.selector.clone()
    } else {
        (0..setup.problem.invariant_count()).collect()
    };
    let mut header = vec!["variant".to_string(), "t".to_string()];
    header.extend(shown.iter().map(|i| format!("G{}_dev", i + 1)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = CsvTable::new(&header);
    let mut m = Metrics::default();
    if tf <= setup.problem.initial_time() {
        return Ok((table, m));
    }
    let runs = both_runs(&setup, cfg, dt, tf)?;
    let mut emit = |variant: &str, times: &[f64], states: &[Vec<f64>]| -> Result<f64, ExperimentError> {
        let dev = setup.deviations(states, &shown)?;
        let mut worst: f64 = 0.0;
        for (t, d) in times.iter().zip(&dev) {
            let mut row = vec![variant.to_string(), format!("{t:e}")];
            row.extend(d.iter().map(|v| format!("{v:e}")));
            worst = d.iter().fold(worst, |w, v| w.max(v.abs()));
            table.push(row);
        }
        Ok(worst)
    };
    m.put("baseline_drift", emit("baseline", &runs.baseline.times, &runs.baseline.states)?);
    if let Some(r) = &runs.relaxed {
        m.put("relaxed_drift", emit("relaxed", &r.times, &r.states)?);
        m.put("inexact_steps", r.inexact_steps as f64);
    }
    Ok((table, m))
}

/// Long format `variant, t, error`, sampled every step.
pub(super) fn error_growth(cfg: &ExperimentConfig) -> Result<(CsvTable, Metrics), ExperimentError> {
    let setup = Setup::new(cfg)?;
    let (dt, tf) = (single_dt(cfg)?, final_time(cfg)?);
    let t0 = setup.problem.initial_time();
    let mut table = CsvTable::new(&["variant", "t", "error"]);
    let mut m = Metrics::default();
    if tf <= t0 {
        return Ok((table, m));
    }
    let truth = setup.truth(tf + 4.0 * dt)?;
    let runs = both_runs(&setup, cfg, dt, tf)?;
    let mut emit = |variant: &str, times: &[f64], states: &[Vec<f64>]| -> Result<(), ExperimentError> {
        let errors = times
            .iter()
            .zip(states)
            .map(|(t, u)| Ok(max_diff(u, &truth.at(*t)?)))
            .collect::<Result<Vec<f64>, ExperimentError>>()?;
        for (t, e) in times.iter().zip(&errors) {
            table.push(vec![variant.to_string(), format!("{t:e}"), format!("{e:e}")]);
        }
        m.put_opt(&format!("{variant}_slope"), growth_slope(t0, times, &errors, cfg.fit_from, &cfg.exclude));
        // Running maximum: insensitive to the phase-driven oscillation of the raw error.
        let envelope: Vec<f64> = errors
            .iter()
            .scan(0.0f64, |m, e| {
                *m = m.max(*e);
                Some(*m)
            })
            .collect();
        m.put_opt(
            &format!("{variant}_envelope_slope"),
            growth_slope(t0, times, &envelope, cfg.fit_from, &cfg.exclude),
        );
        m.put(&format!("{variant}_final_error"), *errors.last().unwrap());
        m.put(&format!("{variant}_max_error"), errors.iter().cloned().fold(0.0, f64::max));
        Ok(())
    };
    emit("baseline", &runs.baseline.times, &runs.baseline.states)?;
    if let Some(r) = &runs.relaxed {
        emit("relaxed", &r.times, &r.states)?;
        m.put("inexact_steps", r.inexact_steps as f64);
    }
    Ok((table, m))
}

/// Columns `dt, max_gamma`: one relaxed step from the initial state per `Δt`.
pub(super) fn gamma_scaling(cfg: &ExperimentConfig) -> Result<(CsvTable, Metrics), ExperimentError> {
    let setup = Setup::new(cfg)?;
    if !setup.relaxed() {
        return Err(ExperimentError::Config(format!("{}: gamma-scaling needs relaxation", cfg.id)));
    }
    if setup.selector.len() != setup.problem.invariant_count() {
        return Err(ExperimentError::Config(format!(
            "{}: gamma-scaling relaxes every invariant of the problem",
            cfg.id
        )));
    }
    if cfg.dts.is_empty() {
        return Err(missing(cfg, "dt"));
    }
    let set = setup.set.leading(setup.selector.len())?;
    let gammas = gamma_scaling_probe(setup.problem.as_ref(), &set, &cfg.dts, &cfg.solver)
        .map_err(|e| ExperimentError::Run { dt: f64::NAN, msg: e.to_string() })?;
    let mut table = CsvTable::new(&["dt", "max_gamma"]);
    for (dt, g) in cfg.dts.iter().zip(&gammas) {
        table.push(vec![format!("{dt:e}"), format!("{g:e}")]);
    }
    let mut m = Metrics::default();
    // Steps already conserving to tolerance give γ = 0 and carry no slope information.
    m.put_opt("gamma_slope", loglog_slope(&cfg.dts, &gammas));
    Ok((table, m))
}
