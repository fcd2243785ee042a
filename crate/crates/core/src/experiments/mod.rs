//! Experiment runner: one CSV per configured run plus a pass/fail summary.
//!
//! Each manifest entry names a kind, its inputs and optional `expect.*`
//! bands. Metrics a run produces are checked against those bands; entries
//! tagged with a `criterion` roll up into one verdict per criterion.

pub mod checks;
mod config;
pub mod fit;
mod ode;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::kdv::{run_kdv, write_kdv_csv, KdvConfig, KdvError};
use crate::problems::{ProblemError, SolitonCount};
use crate::reference::ReferenceError;
use crate::relaxation::RelaxationError;
use crate::tableaux::{audit_catalogue, TableauError};

pub use checks::CheckError;
pub use config::{parse_manifest, Band, ExperimentConfig, ExperimentKind, ManifestEntry, Relax};

/// The shipped manifest covering every reproduced figure and table.
pub const DEFAULT_MANIFEST: &str = include_str!("../../manifests/default.manifest");

/// Artifact tags the default manifest must cover.
pub const REQUIRED_COVERAGE: &[&str] = &[
    "tableaux",
    "rigid-body-convergence",
    "rigid-body-invariants",
    "rigid-body-error-growth",
    "lotka-volterra-invariants",
    "lotka-volterra-error-growth",
    "kepler-invariants",
    "kepler-error-growth",
    "perturbed-kepler-invariants",
    "perturbed-kepler-error-growth",
    "gamma-scaling",
    "kdv-structure",
    "kdv-invariant-table",
    "kdv-1-soliton-error-growth",
    "kdv-2-soliton-error-growth",
    "kdv-3-soliton-error-growth",
    "kdv-2-soliton-whitham",
    "kdv-3-soliton-whitham",
    "kdv-eta2-probe",
    "relaxation-oracle",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("run with dt = {dt} failed: {msg}")]
    Run { dt: f64, msg: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error(transparent)]
    Kdv(#[from] KdvError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Named scalar results of a run, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics(Vec<(String, f64)>);

impl Metrics {
    pub fn put(&mut self, name: &str, value: f64) {
        self.0.push((name.to_string(), value));
    }

    /// Undefined values are stored as NaN, which fails every band.
    pub fn put_opt(&mut self, name: &str, value: Option<f64>) {
        self.put(name, value.unwrap_or(f64::NAN));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:e}"))
}

/// Header plus string rows, serialised with the `csv` crate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }
}

/// Result of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: String,
    pub csv: Vec<u8>,
    pub metrics: Metrics,
    pub notes: Vec<String>,
}

fn one_row(pairs: &[(&str, String)]) -> CsvTable {
    let header: Vec<&str> = pairs.iter().map(|p| p.0).collect();
    let mut t = CsvTable::new(&header);
    t.push(pairs.iter().map(|p| p.1.clone()).collect());
    t
}

fn kdv_config(cfg: &ExperimentConfig) -> Result<KdvConfig, ExperimentError> {
    let count = cfg.solitons.unwrap_or(1);
    let solitons = SolitonCount::from_count(count)
        .ok_or_else(|| ExperimentError::Config(format!("{}: solitons must be 1, 2 or 3, got {count}", cfg.id)))?;
    let mut k = KdvConfig::standard(solitons);
    if let Some(n) = cfg.n {
        k.n = n;
    }
    if let Some(d) = cfg.domain {
        k.domain = d;
    }
    if let Some(t0) = cfg.t0 {
        k.t0 = t0;
    }
    if let Some(tf) = cfg.tf {
        k.tf = tf;
    }
    match cfg.dts.as_slice() {
        [] => {}
        [dt] => k.dt = *dt,
        _ => return Err(ExperimentError::Config(format!("{}: expected a single dt", cfg.id))),
    }
    if let Some(m) = &cfg.method {
        k.method = m.clone();
    }
    k.relax = cfg.relax.kdv_mode()?;
    k.solver = cfg.solver.clone();
    Ok(k)
}

fn kdv(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let k = kdv_config(cfg)?;
    let run = run_kdv(&k)?;
    let mut csv = Vec::new();
    write_kdv_csv(&run, &mut csv)?;
    let mut m = Metrics::default();
    for (i, v) in run.summary.max_eta_dev.iter().enumerate() {
        m.put(&format!("eta{i}_drift"), *v);
    }
    m.put("final_error", run.summary.final_error);
    let times: Vec<f64> = run.rows.iter().map(|r| r.t).collect();
    let errors: Vec<f64> = run.rows.iter().map(|r| r.error).collect();
    m.put_opt("slope", fit::growth_slope(k.t0, &times, &errors, cfg.fit_from, &cfg.exclude));
    m.put("steps", run.summary.steps as f64);
    m.put("inexact_steps", run.summary.inexact_steps as f64);
    Ok(Outcome {
        id: cfg.id.clone(),
        csv,
        metrics: m,
        notes: Vec::new(),
    })
}

fn eta2_probe(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let k = kdv_config(cfg)?;
    let problem = k.problem()?;
    let samples = cfg.samples.unwrap_or(1001);
    let rate = crate::kdv::eta2_drift_probe(&problem, k.t0, k.tf, samples);
    let mut m = Metrics::default();
    m.put("eta2_rate", rate);
    let table = one_row(&[
        ("solitons", k.solitons.count().to_string()),
        ("n", k.n.to_string()),
        ("t0", format!("{:e}", k.t0)),
        ("tf", format!("{:e}", k.tf)),
        ("samples", samples.to_string()),
        ("max_eta2_rate", format!("{rate:e}")),
    ]);
    finish(cfg, table, m)
}

fn tableau_audit(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let reports = audit_catalogue();
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let mut table = CsvTable::new(&[
        "method",
        "stated_orders",
        "verified_orders",
        "rank",
        "smallest_singular_value",
        "abscissa_residual",
        "failures",
    ]);
    let mut notes = Vec::new();
    for r in &reports {
        table.push(vec![
            r.name.clone(),
            join(&r.stated_orders),
            join(&r.verified_orders),
            r.rank.to_string(),
            format!("{:e}", r.smallest_singular_value),
            format!("{:e}", r.abscissa_residual),
            r.failures.join("; "),
        ]);
        notes.extend(r.failures.iter().map(|f| format!("{}: {f}", r.name)));
    }
    let mut m = Metrics::default();
    m.put("methods", reports.len() as f64);
    m.put("failed_methods", reports.iter().filter(|r| !r.passed()).count() as f64);
    m.put(
        "max_abscissa_residual",
        reports.iter().map(|r| r.abscissa_residual).fold(0.0, f64::max),
    );
    let mut out = finish(cfg, table, m)?;
    out.notes = notes;
    Ok(out)
}

fn kdv_structure(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let n = cfg.n.unwrap_or(512);
    let domain = cfg.domain.unwrap_or((-20.0, 60.0));
    let fields = cfg.samples.unwrap_or(100);
    let r = checks::kdv_structure(n, domain, fields, cfg.seed)?;
    let mut m = Metrics::default();
    m.put("skew_d1", r.skew_d1);
    m.put("skew_d3", r.skew_d3);
    m.put("mass_rate", r.mass_rate);
    m.put("energy_rate", r.energy_rate);
    let table = one_row(&[
        ("n", n.to_string()),
        ("fields", fields.to_string()),
        ("skew_d1", format!("{:e}", r.skew_d1)),
        ("skew_d3", format!("{:e}", r.skew_d3)),
        ("mass_rate", format!("{:e}", r.mass_rate)),
        ("energy_rate", format!("{:e}", r.energy_rate)),
    ]);
    finish(cfg, table, m)
}

fn oracle(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let samples = cfg.samples.unwrap_or(1000);
    let deviation = checks::quadratic_oracle(samples, cfg.seed)?;
    let jacobian = checks::jacobian_fd_defect(samples.div_ceil(20), cfg.seed)?;
    let mut m = Metrics::default();
    m.put("oracle_deviation", deviation);
    m.put("jacobian_fd_defect", jacobian);
    let table = one_row(&[
        ("samples", samples.to_string()),
        ("oracle_deviation", format!("{deviation:e}")),
        ("jacobian_fd_defect", format!("{jacobian:e}")),
    ]);
    finish(cfg, table, m)
}

fn finish(cfg: &ExperimentConfig, table: CsvTable, metrics: Metrics) -> Result<Outcome, ExperimentError> {
    Ok(Outcome {
        id: cfg.id.clone(),
        csv: table.to_bytes()?,
        metrics,
        notes: Vec::new(),
    })
}

/// Runs one experiment. Nothing is written to disk.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome, ExperimentError> {
    let ode = |f: fn(&ExperimentConfig) -> Result<(CsvTable, Metrics), ExperimentError>| {
        let (table, m) = f(cfg)?;
        finish(cfg, table, m)
    };
    match cfg.kind {
        ExperimentKind::Convergence => ode(ode::convergence),
        ExperimentKind::Invariants => ode(ode::invariant_drift),
        ExperimentKind::ErrorGrowth => ode(ode::error_growth),
        ExperimentKind::GammaScaling => ode(ode::gamma_scaling),
        ExperimentKind::Kdv => kdv(cfg),
        ExperimentKind::TableauAudit => tableau_audit(cfg),
        ExperimentKind::KdvStructure => kdv_structure(cfg),
        ExperimentKind::Eta2Probe => eta2_probe(cfg),
        ExperimentKind::Oracle => oracle(cfg),
    }
}

/// One checked (or informational) metric of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub id: String,
    pub criterion: Option<u32>,
    pub metric: String,
    pub value: Option<f64>,
    /// `None` for informational rows, which always pass.
    pub band: Option<Band>,
    pub pass: bool,
    pub note: String,
}

impl SummaryRow {
    /// Rows with a band or an error decide pass/fail.
    pub fn is_check(&self) -> bool {
        self.band.is_some() || !self.pass
    }
}

/// Summary rows for one finished (or failed) entry.
pub fn summarize(
    id: &str,
    cfg: Option<&ExperimentConfig>,
    result: &Result<Outcome, ExperimentError>,
) -> Vec<SummaryRow> {
    let criterion = cfg.and_then(|c| c.criterion);
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            return vec![SummaryRow {
                id: id.to_string(),
                criterion,
                metric: "status".into(),
                value: None,
                band: None,
                pass: false,
                note: e.to_string(),
            }]
        }
    };
    let expect = cfg.map_or(&[][..], |c| c.expect.as_slice());
    let band_for = |name: &str| expect.iter().find(|(k, _)| k == name).map(|(_, b)| *b);
    let mut rows: Vec<SummaryRow> = outcome
        .metrics
        .iter()
        .map(|(name, value)| {
            let band = band_for(name);
            SummaryRow {
                id: id.to_string(),
                criterion,
                metric: name.to_string(),
                value: Some(value),
                band,
                pass: band.is_none_or(|b| b.contains(value)),
                note: String::new(),
            }
        })
        .collect();
    for (name, band) in expect {
        if outcome.metrics.get(name).is_none() {
            rows.push(SummaryRow {
                id: id.to_string(),
                criterion,
                metric: name.clone(),
                value: None,
                band: Some(*band),
                pass: false,
                note: "metric not produced".into(),
            });
        }
    }
    if let Some(first_check) = rows.iter_mut().find(|r| r.band.is_some()) {
        first_check.note = outcome.notes.join("; ");
    }
    rows
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// Verdict per criterion: every check row tagged with it passes.
    pub fn criteria(&self) -> BTreeMap<u32, bool> {
        let mut out = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.is_check()) {
            if let Some(c) = r.criterion {
                *out.entry(c).or_insert(true) &= r.pass;
            }
        }
        out
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SummaryRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// Columns `id, criterion, metric, value, band, pass, note`.
    pub fn to_csv(&self) -> Result<Vec<u8>, csv::Error> {
        let mut t = CsvTable::new(&["id", "criterion", "metric", "value", "band", "pass", "note"]);
        for r in &self.rows {
            t.push(vec![
                r.id.clone(),
                r.criterion.map_or_else(String::new, |c| c.to_string()),
                r.metric.clone(),
                fmt_opt(r.value),
                r.band.map_or_else(String::new, |b| b.to_string()),
                if r.pass { "PASS" } else { "FAIL" }.to_string(),
                r.note.clone(),
            ]);
        }
        t.to_bytes()
    }
}

/// Outcome of one manifest entry inside [`run_all`].
#[derive(Debug)]
pub struct EntryResult {
    pub id: String,
    pub config: Option<ExperimentConfig>,
    pub result: Result<Outcome, ExperimentError>,
    pub seconds: f64,
}

fn run_entry(entry: &ManifestEntry, duplicate: bool, out_dir: Option<&Path>) -> EntryResult {
    let start = std::time::Instant::now();
    let id = entry.label();
    let config = ExperimentConfig::from_pairs(&entry.pairs);
    let (config, result) = match config {
        Err(e) => (None, Err(e)),
        Ok(_) if duplicate => (None, Err(ExperimentError::Manifest(format!("duplicate id `{id}`")))),
        Ok(cfg) => {
            let result = run_experiment(&cfg).and_then(|o| {
                if let Some(dir) = out_dir {
                    fs::write(dir.join(cfg.csv_name()), &o.csv)?;
                }
                Ok(o)
            });
            (Some(cfg), result)
        }
    };
    EntryResult {
        id,
        config,
        result,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs every entry on up to `workers` threads, continuing past failures.
/// CSVs and `summary.csv` go to `out_dir` when given. Results keep
/// manifest order.
pub fn run_all(
    entries: &[ManifestEntry],
    workers: usize,
    out_dir: Option<&Path>,
) -> Result<(Summary, Vec<EntryResult>), ExperimentError> {
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut seen = HashSet::new();
    let duplicate: Vec<bool> = entries.iter().map(|e| !seen.insert(e.label())).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
    let results: Vec<EntryResult> = pool.install(|| {
        entries
            .par_iter()
            .zip(duplicate.par_iter())
            .map(|(e, &dup)| run_entry(e, dup, out_dir))
            .collect()
    });
    let rows = results
        .iter()
        .flat_map(|r| summarize(&r.id, r.config.as_ref(), &r.result))
        .collect();
    let summary = Summary { rows };
    if let Some(dir) = out_dir {
        fs::write(dir.join("summary.csv"), summary.to_csv()?)?;
    }
    Ok((summary, results))
}
