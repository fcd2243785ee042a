use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mrrk::experiments::{parse_manifest, run_all, run_experiment, summarize, ExperimentConfig, DEFAULT_MANIFEST};

#[derive(Parser)]
#[command(name = "mrrk", version, about = "Relaxation Runge-Kutta experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Observed order over a list of step sizes.
    Convergence(RunArgs),
    /// Invariant deviations per step.
    Invariants(RunArgs),
    /// Max-norm error per step and its long-time slope.
    ErrorGrowth(RunArgs),
    /// Size of the relaxation parameters of one step against Δt.
    GammaScaling(RunArgs),
    /// KdV soliton run.
    Kdv(RunArgs),
    /// Order, rank and abscissa audit of every shipped method.
    TableauAudit(RunArgs),
    /// Skew-symmetry and semi-discrete conservation on random fields.
    KdvStructure(RunArgs),
    /// max |dη₂/dt| along an exact soliton solution.
    Eta2Probe(RunArgs),
    /// Closed-form root and finite-difference Jacobian checks.
    Oracle(RunArgs),
    /// Every entry of a manifest; exit status 0 iff every check passes.
    RunAll {
        /// Manifest file; the shipped default when omitted.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Directory for per-experiment CSVs and summary.csv.
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    method: Option<String>,
    /// One step size or a comma-separated list.
    #[arg(long)]
    dt: Option<String>,
    /// Expand a single --dt into dt·2^-k for k = 0..=halvings.
    #[arg(long)]
    halvings: Option<u32>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    tf: Option<f64>,
    /// off | on | index list such as 0,1 | energy | energy+whitham
    #[arg(long)]
    relax: Option<String>,
    #[arg(long)]
    relax_tol: Option<f64>,
    #[arg(long)]
    relax_max_iter: Option<usize>,
    #[arg(long)]
    relax_fallback_grid: Option<usize>,
    #[arg(long)]
    relax_allow_inexact: bool,
    #[arg(long)]
    solitons: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Spatial domain `left,right`.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// Windows left out of slope fits, e.g. `-5..5,20..22`.
    #[arg(long, allow_hyphen_values = true)]
    exclude: Option<String>,
    #[arg(long)]
    fit_from: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn pairs(&self, kind: &str) -> Vec<(String, String)> {
        let mut p = vec![("id".to_string(), kind.to_string()), ("kind".to_string(), kind.to_string())];
        let mut add = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                p.push((k.to_string(), v));
            }
        };
        add("problem", self.problem.clone());
        add("method", self.method.clone());
        add("dt", self.dt.clone());
        add("halvings", self.halvings.map(|v| v.to_string()));
        add("t0", self.t0.map(|v| v.to_string()));
        add("tf", self.tf.map(|v| v.to_string()));
        add("relax", self.relax.clone());
        add("relax_tol", self.relax_tol.map(|v| v.to_string()));
        add("relax_max_iter", self.relax_max_iter.map(|v| v.to_string()));
        add("relax_fallback_grid", self.relax_fallback_grid.map(|v| v.to_string()));
        add("relax_allow_inexact", self.relax_allow_inexact.then(|| "true".to_string()));
        add("solitons", self.solitons.map(|v| v.to_string()));
        add("n", self.n.map(|v| v.to_string()));
        add("domain", self.domain.clone());
        add("exclude", self.exclude.clone());
        add("fit_from", self.fit_from.map(|v| v.to_string()));
        add("samples", self.samples.map(|v| v.to_string()));
        add("seed", self.seed.map(|v| v.to_string()));
        p
    }
}

fn single(kind: &str, args: &RunArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_pairs(&args.pairs(kind))?;
    let outcome = run_experiment(&cfg)?;
    match &args.out {
        Some(path) => std::fs::write(path, &outcome.csv)?,
        None => print!("{}", String::from_utf8_lossy(&outcome.csv)),
    }
    for row in summarize(&cfg.id, Some(&cfg), &Ok(outcome)) {
        eprintln!("{} = {}", row.metric, row.value.map_or("-".into(), |v| format!("{v:e}")));
    }
    Ok(ExitCode::SUCCESS)
}

fn all(manifest: Option<PathBuf>, workers: usize, out_dir: PathBuf) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let text = match manifest {
        Some(path) => std::fs::read_to_string(path)?,
        None => DEFAULT_MANIFEST.to_string(),
    };
    let entries = parse_manifest(&text)?;
    let (summary, results) = run_all(&entries, workers, Some(&out_dir))?;
    for r in &results {
        let status = if r.result.is_ok() { "done" } else { "error" };
        eprintln!("{:<44} {status:<5} {:>8.2}s", r.id, r.seconds);
    }
    for row in summary.rows.iter().filter(|r| r.is_check()) {
        println!(
            "{} {:<44} {:<28} {:>12} {}",
            if row.pass { "PASS" } else { "FAIL" },
            row.id,
            row.metric,
            row.value.map_or("-".into(), |v| format!("{v:.3e}")),
            row.band.map_or_else(|| row.note.clone(), |b| b.to_string()),
        );
    }
    for (criterion, pass) in summary.criteria() {
        println!("criterion {criterion:>2}: {}", if pass { "PASS" } else { "FAIL" });
    }
    Ok(if summary.all_pass() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Convergence(a) => single("convergence", a),
        Command::Invariants(a) => single("invariants", a),
        Command::ErrorGrowth(a) => single("error-growth", a),
        Command::GammaScaling(a) => single("gamma-scaling", a),
        Command::Kdv(a) => single("kdv", a),
        Command::TableauAudit(a) => single("tableau-audit", a),
        Command::KdvStructure(a) => single("kdv-structure", a),
        Command::Eta2Probe(a) => single("eta2-probe", a),
        Command::Oracle(a) => single("oracle", a),
        Command::RunAll {
            manifest,
            workers,
            out_dir,
        } => all(manifest.clone(), *workers, out_dir.clone()),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
