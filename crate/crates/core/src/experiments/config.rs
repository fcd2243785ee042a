//! Experiment configuration and the manifest format.
//!
//! A manifest is a list of `key = value` blocks separated by blank lines.
//! `#` starts a comment. Keys:
//!
//! ```text
//! id = rigid-heun-growth        # required, unique
//! kind = error-growth           # see ExperimentKind
//! problem = rigid-body
//! method = Heun(3,3)
//! dt = 0.04                     # or a comma list
//! halvings = 6                  # expands a single dt into dt·2^-k, k = 0..=6
//! tf = 1000
//! relax = on                    # off | on | 0,1 | energy | energy+whitham
//! expect.relaxed_slope = 0.7..1.3
//! criterion = 5
//! ```
//!
//! Further keys: `t0`, `solitons`, `n`, `domain = a,b`, `exclude = a..b, c..d`,
//! `fit_from` (fraction of elapsed time where slope fits start), `samples`,
//! `order_floor`, `seed`, `out`, `covers`, `note`, and the solver keys
//! `relax_tol`, `relax_max_iter`, `relax_fallback_grid`, `relax_allow_inexact`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::kdv::RelaxMode;
use crate::relaxation::SolverConfig;

use super::fit::Window;
use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    Convergence,
    Invariants,
    ErrorGrowth,
    GammaScaling,
    Kdv,
    TableauAudit,
    KdvStructure,
    Eta2Probe,
    Oracle,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Convergence,
        ExperimentKind::Invariants,
        ExperimentKind::ErrorGrowth,
        ExperimentKind::GammaScaling,
        ExperimentKind::Kdv,
        ExperimentKind::TableauAudit,
        ExperimentKind::KdvStructure,
        ExperimentKind::Eta2Probe,
        ExperimentKind::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Invariants => "invariants",
            ExperimentKind::ErrorGrowth => "error-growth",
            ExperimentKind::GammaScaling => "gamma-scaling",
            ExperimentKind::Kdv => "kdv",
            ExperimentKind::TableauAudit => "tableau-audit",
            ExperimentKind::KdvStructure => "kdv-structure",
            ExperimentKind::Eta2Probe => "eta2-probe",
            ExperimentKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ExperimentError::Config(format!("unknown experiment kind `{s}`")))
    }
}

/// Which invariants relaxation enforces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Relax {
    Off,
    /// Every invariant of the problem.
    On,
    /// The listed invariant indices, in order.
    Indices(Vec<usize>),
    Kdv(RelaxMode),
}

impl Relax {
    pub fn is_off(&self) -> bool {
        matches!(self, Relax::Off | Relax::Kdv(RelaxMode::Off))
    }

    /// Invariant indices for an ODE problem with `count` invariants.
    pub fn selector(&self, count: usize) -> Result<Vec<usize>, ExperimentError> {
        match self {
            Relax::Off => Ok(Vec::new()),
            Relax::On => Ok((0..count).collect()),
            Relax::Indices(ix) => match ix.iter().find(|&&i| i >= count) {
                Some(i) => Err(ExperimentError::Config(format!(
                    "invariant index {i} out of range (problem has {count})"
                ))),
                None => Ok(ix.clone()),
            },
            Relax::Kdv(m) => Err(ExperimentError::Config(format!(
                "relaxation mode `{}` applies to kdv runs only",
                m.as_str()
            ))),
        }
    }

    pub fn kdv_mode(&self) -> Result<RelaxMode, ExperimentError> {
        match self {
            Relax::Off => Ok(RelaxMode::Off),
            Relax::Kdv(m) => Ok(*m),
            other => Err(ExperimentError::Config(format!(
                "kdv runs take off, energy or energy+whitham, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Relax {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relax::Off => f.write_str("off"),
            Relax::On => f.write_str("on"),
            Relax::Indices(ix) => {
                let parts: Vec<String> = ix.iter().map(usize::to_string).collect();
                f.write_str(&parts.join(","))
            }
            Relax::Kdv(m) => f.write_str(m.as_str()),
        }
    }
}

impl FromStr for Relax {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" | "none" | "baseline" => Ok(Relax::Off),
            "on" | "all" => Ok(Relax::On),
            "energy" => Ok(Relax::Kdv(RelaxMode::Energy)),
            "energy+whitham" => Ok(Relax::Kdv(RelaxMode::EnergyWhitham)),
            list => list
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map(Relax::Indices)
                .map_err(|_| ExperimentError::Config(format!("unknown relaxation mode `{s}`"))),
        }
    }
}

/// Closed interval with optional ends, written `lo..hi`, `..hi` or `lo..`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Band {
    pub fn contains(&self, v: f64) -> bool {
        !v.is_nan() && self.lo.is_none_or(|lo| v >= lo) && self.hi.is_none_or(|hi| v <= hi)
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(lo) = self.lo {
            write!(f, "{lo:e}")?;
        }
        f.write_str("..")?;
        if let Some(hi) = self.hi {
            write!(f, "{hi:e}")?;
        }
        Ok(())
    }
}

impl FromStr for Band {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ExperimentError::Config(format!("bad band `{s}`, expected lo..hi"));
        let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
        let end = |x: &str| -> Result<Option<f64>, ExperimentError> {
            let x = x.trim();
            if x.is_empty() {
                Ok(None)
            } else {
                x.parse().map(Some).map_err(|_| bad())
            }
        };
        Ok(Band {
            lo: end(lo)?,
            hi: end(hi)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub kind: ExperimentKind,
    pub problem: Option<String>,
    pub method: Option<String>,
    pub dts: Vec<f64>,
    pub t0: Option<f64>,
    pub tf: Option<f64>,
    pub relax: Relax,
    pub solver: SolverConfig,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub solitons: Option<usize>,
    pub n: Option<usize>,
    pub domain: Option<(f64, f64)>,
    /// Absolute-time windows left out of slope fits.
    pub exclude: Vec<Window>,
    /// Slope fits start at this fraction of the elapsed time.
    pub fit_from: f64,
    /// Sample count for randomised checks and probes.
    pub samples: Option<usize>,
    /// Convergence fits ignore errors below this level.
    pub order_floor: f64,
    pub criterion: Option<u32>,
    /// Artifact tags this entry reproduces.
    pub covers: Vec<String>,
    pub expect: Vec<(String, Band)>,
    pub note: Option<String>,
}

impl ExperimentConfig {
    pub fn new(id: impl Into<String>, kind: ExperimentKind) -> Self {
        ExperimentConfig {
            id: id.into(),
            kind,
            problem: None,
            method: None,
            dts: Vec::new(),
            t0: None,
            tf: None,
            relax: Relax::Off,
            solver: SolverConfig::default(),
            out: None,
            seed: 0,
            solitons: None,
            n: None,
            domain: None,
            exclude: Vec::new(),
            fit_from: 0.1,
            samples: None,
            order_floor: 1e-12,
            criterion: None,
            covers: Vec::new(),
            expect: Vec::new(),
            note: None,
        }
    }

    /// Builds a config from `key = value` pairs. Names are not resolved here.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ExperimentError> {
        let get = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let id = get("id").ok_or_else(|| ExperimentError::Config("missing `id`".into()))?;
        let kind: ExperimentKind = get("kind")
            .ok_or_else(|| ExperimentError::Config(format!("{id}: missing `kind`")))?
            .parse()?;
        let mut cfg = ExperimentConfig::new(id, kind);
        let mut halvings = 0;
        for (key, value) in pairs {
            let v = value.as_str();
            match key.as_str() {
                "id" | "kind" => {}
                "problem" => cfg.problem = Some(v.to_string()),
                "method" => cfg.method = Some(v.to_string()),
                "dt" => cfg.dts = parse_list(key, v)?,
                "halvings" => halvings = parse(key, v)?,
                "t0" => cfg.t0 = Some(parse(key, v)?),
                "tf" => cfg.tf = Some(parse(key, v)?),
                "relax" => cfg.relax = v.parse()?,
                "relax_tol" => cfg.solver.tol = parse(key, v)?,
                "relax_max_iter" => cfg.solver.max_iter = parse(key, v)?,
                "relax_fallback_grid" => cfg.solver.fallback_grid = parse(key, v)?,
                "relax_allow_inexact" => cfg.solver.allow_inexact = parse(key, v)?,
                "out" => cfg.out = Some(PathBuf::from(v)),
                "seed" => cfg.seed = parse(key, v)?,
                "solitons" => cfg.solitons = Some(parse(key, v)?),
                "n" | "N" => cfg.n = Some(parse(key, v)?),
                "domain" => {
                    let d: Vec<f64> = parse_list(key, v)?;
                    if d.len() != 2 {
                        return Err(ExperimentError::Config(format!("{id}: domain needs two values")));
                    }
                    cfg.domain = Some((d[0], d[1]));
                }
                "exclude" => {
                    cfg.exclude = v
                        .split(',')
                        .map(|w| {
                            let b: Band = w.trim().parse()?;
                            match (b.lo, b.hi) {
                                (Some(start), Some(end)) => Ok(Window { start, end }),
                                _ => Err(ExperimentError::Config(format!("{id}: window `{w}` needs both ends"))),
                            }
                        })
                        .collect::<Result<_, _>>()?
                }
                "fit_from" => cfg.fit_from = parse(key, v)?,
                "samples" => cfg.samples = Some(parse(key, v)?),
                "order_floor" => cfg.order_floor = parse(key, v)?,
                "criterion" => cfg.criterion = Some(parse(key, v)?),
                "covers" => cfg.covers = v.split(',').map(|s| s.trim().to_string()).collect(),
                "note" => cfg.note = Some(v.to_string()),
                k => match k.strip_prefix("expect.") {
                    Some(metric) => cfg.expect.push((metric.to_string(), v.parse()?)),
                    None => return Err(ExperimentError::Config(format!("{id}: unknown key `{k}`"))),
                },
            }
        }
        if halvings > 0 {
            let base = *cfg
                .dts
                .first()
                .ok_or_else(|| ExperimentError::Config(format!("{id}: `halvings` needs `dt`")))?;
            cfg.dts = (0..=halvings).map(|k| base / f64::powi(2.0, k)).collect();
        }
        if let Some(bad) = cfg.dts.iter().find(|dt| !(**dt > 0.0)) {
            return Err(ExperimentError::Config(format!("{id}: step size must be positive, got {bad}")));
        }
        Ok(cfg)
    }

    /// `out`, or `<id>.csv`.
    pub fn csv_name(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", self.id)))
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, ExperimentError> {
    v.trim()
        .parse()
        .map_err(|_| ExperimentError::Config(format!("bad value `{v}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ExperimentError> {
    v.split(',').map(|p| parse(key, p)).collect()
}

/// One block of a manifest, before interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// 1-based line of the block's first key.
    pub line: usize,
    pub pairs: Vec<(String, String)>,
}

impl ManifestEntry {
    /// The `id` value, or a placeholder naming the line.
    pub fn label(&self) -> String {
        self.pairs
            .iter()
            .find(|(k, _)| k == "id")
            .map_or_else(|| format!("entry@{}", self.line), |(_, v)| v.clone())
    }
}

/// Splits manifest text into blocks. Only lines without `=` are rejected;
/// everything else is checked per entry.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, ExperimentError> {
    let mut entries = Vec::new();
    let mut current: Option<ManifestEntry> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
        if line.is_empty() {
            // Comment-only lines do not end a block.
            if raw.trim().is_empty() {
                entries.extend(current.take());
            }
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ExperimentError::Manifest(format!("line {}: expected key = value", i + 1)))?;
        current
            .get_or_insert_with(|| ManifestEntry {
                line: i + 1,
                pairs: Vec::new(),
            })
            .pairs
            .push((k.trim().to_string(), v.trim().to_string()));
    }
    entries.extend(current);
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(text: &str) -> Vec<(String, String)> {
        parse_manifest(text).unwrap().remove(0).pairs
    }

    #[test]
    fn manifest_blocks() {
        let text = "# header\n\nid = a\nkind = oracle # trailing\n\n\n# between\nid = b\n# inside\nkind = kdv\n";
        let e = parse_manifest(text).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].line, 3);
        assert_eq!(e[1].pairs.len(), 2);
        assert_eq!(e[1].label(), "b");
        assert!(parse_manifest("").unwrap().is_empty());
        assert!(parse_manifest("id = x\nnonsense\n").is_err());
    }

    #[test]
    fn config_fields() {
        let cfg = ExperimentConfig::from_pairs(&pairs(
            "id = c\nkind = convergence\nproblem = rigid-body\nmethod = RK(4,4)\ndt = 0.1\nhalvings = 2\n\
             tf = 5\nrelax = 0,1\nrelax_allow_inexact = true\nexpect.relaxed_order = 3.9..\nexclude = -5..5, 10..12",
        ))
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Convergence);
        assert_eq!(cfg.dts, vec![0.1, 0.05, 0.025]);
        assert_eq!(cfg.relax, Relax::Indices(vec![0, 1]));
        assert!(cfg.solver.allow_inexact);
        assert_eq!(cfg.expect[0].0, "relaxed_order");
        assert!(cfg.expect[0].1.contains(4.2) && !cfg.expect[0].1.contains(3.0));
        assert_eq!(cfg.exclude[1], Window { start: 10.0, end: 12.0 });
        assert_eq!(cfg.csv_name(), PathBuf::from("c.csv"));
    }

    #[test]
    fn config_errors() {
        for text in [
            "kind = kdv",
            "id = x",
            "id = x\nkind = plot",
            "id = x\nkind = kdv\ndt = -0.1",
            "id = x\nkind = kdv\ncolour = red",
            "id = x\nkind = kdv\nexpect.slope = 1",
            "id = x\nkind = kdv\nrelax = sometimes",
        ] {
            assert!(ExperimentConfig::from_pairs(&pairs(text)).is_err(), "{text}");
        }
    }

    #[test]
    fn relax_round_trip() {
        for s in ["off", "on", "0,2", "energy", "energy+whitham"] {
            assert_eq!(s.parse::<Relax>().unwrap().to_string(), s);
        }
        assert_eq!(Relax::On.selector(3).unwrap(), vec![0, 1, 2]);
        assert!(Relax::Indices(vec![3]).selector(3).is_err());
        assert!(Relax::Kdv(RelaxMode::Energy).selector(3).is_err());
        assert!(Relax::On.kdv_mode().is_err());
    }

    #[test]
    fn bands() {
        let b: Band = "..1e-11".parse().unwrap();
        assert!(b.contains(0.0) && !b.contains(1e-10) && !b.contains(f64::NAN));
        assert_eq!(b.to_string(), "..1e-11");
        let b: Band = "1.7..2.3".parse().unwrap();
        assert!(b.contains(2.0) && !b.contains(2.31));
    }
}
