//! Runge-Kutta coefficient sets.
//!
//! Every method used by the experiments lives in a plain-text data file under
//! `tableaux/data/` and is parsed once into either an [`EmbeddedSet`] (explicit
//! methods sharing `A` and `c`) or an [`ArkPair`] (additive explicit/ESDIRK
//! pair sharing `c` and the weight rows). Order conditions up to order five are
//! checked in [`order`].

mod format;
pub mod order;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

pub use format::{parse_method, parse_value};
pub use order::{verify_additive_order, verify_order, MAX_ORDER};

/// Absolute tolerance used when checking order conditions.
pub const ORDER_TOLERANCE: f64 = 1e-12;
/// Tolerance on `c - A e` for catalogue entries.
pub const ABSCISSA_TOLERANCE: f64 = 1e-14;
/// Threshold on the smallest singular value of the row-normalised weight stack.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum TableauError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("method `{name}` is {found}, expected {expected}")]
    WrongKind {
        name: String,
        found: &'static str,
        expected: &'static str,
    },
    #[error("weight index {index} out of range for `{name}` ({count} weight rows)")]
    WeightIndex {
        name: String,
        index: usize,
        count: usize,
    },
}

/// A single Runge-Kutta method `(A, b, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: String,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub stated_order: usize,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// `true` when `A` is strictly lower triangular.
    pub fn is_explicit(&self) -> bool {
        strictly_lower(&self.a)
    }

    pub fn abscissa_residual(&self) -> f64 {
        abscissa_residual(&self.a, &self.c)
    }
}

/// Explicit methods sharing `A` and `c`, differing only in their weights.
///
/// By convention the first weight row advances the solution; the remaining
/// rows only supply additional update directions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSet {
    pub name: String,
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
    pub weights: Vec<DVector<f64>>,
    pub orders: Vec<usize>,
}

impl EmbeddedSet {
    pub fn stages(&self) -> usize {
        self.c.len()
    }

    /// Number of weight rows.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn p_min(&self) -> usize {
        self.orders.iter().copied().min().unwrap_or(0)
    }

    pub fn tableau(&self, k: usize) -> ButcherTableau {
        ButcherTableau {
            name: format!("{} b{}", self.name, k + 1),
            a: self.a.clone(),
            b: self.weights[k].clone(),
            c: self.c.clone(),
            stated_order: self.orders[k],
        }
    }

    /// A new set containing the listed weight rows in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<EmbeddedSet, TableauError> {
        let weights = pick_rows(&self.name, &self.weights, rows)?;
        Ok(EmbeddedSet {
            name: self.name.clone(),
            a: self.a.clone(),
            c: self.c.clone(),
            weights,
            orders: rows.iter().map(|&r| self.orders[r]).collect(),
        })
    }

    /// The first `count` weight rows.
    pub fn leading(&self, count: usize) -> Result<EmbeddedSet, TableauError> {
        self.select(&(0..count).collect::<Vec<_>>())
    }
}

/// Additive Runge-Kutta pair: explicit part for the non-stiff term and an
/// ESDIRK part for the stiff term, with shared abscissae and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ArkPair {
    pub name: String,
    pub explicit: DMatrix<f64>,
    pub implicit: DMatrix<f64>,
    pub c: DVector<f64>,
    pub weights: Vec<DVector<f64>>,
    pub orders: Vec<usize>,
}

impl ArkPair {
    pub fn stages(&self) -> usize {
        self.c.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn explicit_part(&self, k: usize) -> ButcherTableau {
        ButcherTableau {
            name: format!("{} explicit b{}", self.name, k + 1),
            a: self.explicit.clone(),
            b: self.weights[k].clone(),
            c: self.c.clone(),
            stated_order: self.orders[k],
        }
    }

    pub fn implicit_part(&self, k: usize) -> ButcherTableau {
        ButcherTableau {
            name: format!("{} implicit b{}", self.name, k + 1),
            a: self.implicit.clone(),
            b: self.weights[k].clone(),
            c: self.c.clone(),
            stated_order: self.orders[k],
        }
    }

    /// Diagonal of the implicit part (zero first entry, then a constant).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.stages()).map(|i| self.implicit[(i, i)]).collect()
    }

    pub fn select(&self, rows: &[usize]) -> Result<ArkPair, TableauError> {
        let weights = pick_rows(&self.name, &self.weights, rows)?;
        Ok(ArkPair {
            name: self.name.clone(),
            explicit: self.explicit.clone(),
            implicit: self.implicit.clone(),
            c: self.c.clone(),
            weights,
            orders: rows.iter().map(|&r| self.orders[r]).collect(),
        })
    }

    pub fn leading(&self, count: usize) -> Result<ArkPair, TableauError> {
        self.select(&(0..count).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Explicit(EmbeddedSet),
    Additive(ArkPair),
}

impl Method {
    pub fn name(&self) -> &str {
        match self {
            Method::Explicit(s) => &s.name,
            Method::Additive(p) => &p.name,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Method::Explicit(_) => "explicit",
            Method::Additive(_) => "additive",
        }
    }
}

const DATA_FILES: &[&str] = &[
    include_str!("data/ssprk22.tab"),
    include_str!("data/ssprk33.tab"),
    include_str!("data/heun33.tab"),
    include_str!("data/rk44.tab"),
    include_str!("data/fehlberg64.tab"),
    include_str!("data/fehlberg65.tab"),
    include_str!("data/dp75.tab"),
    include_str!("data/ark324l2sa.tab"),
    include_str!("data/ark436l2sa.tab"),
];

/// All shipped methods keyed by name.
pub fn builtin_catalogue() -> &'static BTreeMap<String, Method> {
    static CATALOGUE: OnceLock<BTreeMap<String, Method>> = OnceLock::new();
    CATALOGUE.get_or_init(|| {
        DATA_FILES
            .iter()
            .map(|text| {
                let method = parse_method(text).expect("shipped coefficient file is valid");
                (method.name().to_string(), method)
            })
            .collect()
    })
}

pub fn method(name: &str) -> Result<&'static Method, TableauError> {
    builtin_catalogue()
        .get(name)
        .ok_or_else(|| TableauError::UnknownMethod(name.to_string()))
}

pub fn embedded_set(name: &str) -> Result<EmbeddedSet, TableauError> {
    match method(name)? {
        Method::Explicit(set) => Ok(set.clone()),
        other => Err(TableauError::WrongKind {
            name: name.to_string(),
            found: other.kind(),
            expected: "explicit",
        }),
    }
}

pub fn ark_pair(name: &str) -> Result<ArkPair, TableauError> {
    match method(name)? {
        Method::Additive(pair) => Ok(pair.clone()),
        other => Err(TableauError::WrongKind {
            name: name.to_string(),
            found: other.kind(),
            expected: "additive",
        }),
    }
}

/// Outcome of auditing an embedded set. Failures are collected, not raised.
#[derive(Debug, Clone)]
pub struct EmbeddedSetReport {
    pub name: String,
    pub abscissa_residual: f64,
    pub rank: usize,
    pub smallest_singular_value: f64,
    pub stated_orders: Vec<usize>,
    pub verified_orders: Vec<usize>,
    pub failures: Vec<String>,
}

impl EmbeddedSetReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn check_embedded_set(set: &EmbeddedSet) -> EmbeddedSetReport {
    let abscissa = abscissa_residual(&set.a, &set.c);
    let (rank, smallest) = weight_rank(&set.weights);
    let verified: Vec<usize> = (0..set.len())
        .map(|k| verify_order(&set.tableau(k), MAX_ORDER))
        .collect();

    let mut failures = Vec::new();
    if abscissa > ABSCISSA_TOLERANCE {
        failures.push(format!("|c - Ae| = {abscissa:.3e} exceeds {ABSCISSA_TOLERANCE:e}"));
    }
    if rank < set.len() {
        failures.push(format!(
            "weight rows are rank deficient: rank {rank} < {} (smallest singular value {smallest:.3e})",
            set.len()
        ));
    }
    for (k, (&got, &want)) in verified.iter().zip(&set.orders).enumerate() {
        if got < want {
            failures.push(format!("b{} satisfies order {got}, stated {want}", k + 1));
        }
    }

    EmbeddedSetReport {
        name: set.name.clone(),
        abscissa_residual: abscissa,
        rank,
        smallest_singular_value: smallest,
        stated_orders: set.orders.clone(),
        verified_orders: verified,
        failures,
    }
}

/// Audit of an ARK pair: both abscissa conditions, weight rank and the
/// additive order conditions of every weight row.
pub fn check_ark_pair(pair: &ArkPair) -> EmbeddedSetReport {
    let abscissa = abscissa_residual(&pair.explicit, &pair.c).max(abscissa_residual(&pair.implicit, &pair.c));
    let (rank, smallest) = weight_rank(&pair.weights);
    let verified: Vec<usize> = (0..pair.len())
        .map(|k| verify_additive_order(pair, k, MAX_ORDER))
        .collect();

    let mut failures = Vec::new();
    if abscissa > ABSCISSA_TOLERANCE {
        failures.push(format!("|c - Ae| = {abscissa:.3e} exceeds {ABSCISSA_TOLERANCE:e}"));
    }
    if rank < pair.len() {
        failures.push(format!(
            "weight rows are rank deficient: rank {rank} < {} (smallest singular value {smallest:.3e})",
            pair.len()
        ));
    }
    for (k, (&got, &want)) in verified.iter().zip(&pair.orders).enumerate() {
        if got < want {
            failures.push(format!("b{} satisfies order {got}, stated {want}", k + 1));
        }
    }

    EmbeddedSetReport {
        name: pair.name.clone(),
        abscissa_residual: abscissa,
        rank,
        smallest_singular_value: smallest,
        stated_orders: pair.orders.clone(),
        verified_orders: verified,
        failures,
    }
}

/// Reports for every shipped method, in catalogue order.
pub fn audit_catalogue() -> Vec<EmbeddedSetReport> {
    builtin_catalogue()
        .values()
        .map(|m| match m {
            Method::Explicit(set) => check_embedded_set(set),
            Method::Additive(pair) => check_ark_pair(pair),
        })
        .collect()
}

/// Numerical rank of the row-normalised weight stack and its smallest
/// singular value.
pub fn weight_rank(weights: &[DVector<f64>]) -> (usize, f64) {
    if weights.is_empty() {
        return (0, 0.0);
    }
    let s = weights[0].len();
    let stack = DMatrix::from_fn(weights.len(), s, |i, j| {
        let norm = weights[i].norm();
        if norm > 0.0 {
            weights[i][j] / norm
        } else {
            0.0
        }
    });
    let sv = stack.svd(false, false).singular_values;
    let rank = sv.iter().filter(|&&v| v > RANK_TOLERANCE).count();
    // Fewer columns than rows leaves missing singular values, which are zero.
    let smallest = if weights.len() > s {
        0.0
    } else {
        sv.iter().copied().fold(f64::INFINITY, f64::min)
    };
    (rank, smallest)
}

pub(crate) fn strictly_lower(a: &DMatrix<f64>) -> bool {
    (0..a.nrows()).all(|i| (i..a.ncols()).all(|j| a[(i, j)] == 0.0))
}

pub(crate) fn abscissa_residual(a: &DMatrix<f64>, c: &DVector<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| (a.row(i).sum() - c[i]).abs())
        .fold(0.0, f64::max)
}

fn pick_rows(
    name: &str,
    weights: &[DVector<f64>],
    rows: &[usize],
) -> Result<Vec<DVector<f64>>, TableauError> {
    rows.iter()
        .map(|&r| {
            weights.get(r).cloned().ok_or_else(|| TableauError::WeightIndex {
                name: name.to_string(),
                index: r,
                count: weights.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const NAMES: [&str; 9] = [
        "SSPRK(2,2)",
        "SSPRK(3,3)",
        "Heun(3,3)",
        "RK(4,4)",
        "Fehlberg(6,4)",
        "Fehlberg(6,5)",
        "DP(7,5)",
        "ARK3(2)4L[2]SA",
        "ARK4(3)6L[2]SA",
    ];

    #[test]
    fn catalogue_has_exactly_the_shipped_methods() {
        let cat = builtin_catalogue();
        assert_eq!(cat.len(), NAMES.len());
        for name in NAMES {
            assert!(cat.contains_key(name), "{name} missing");
        }
    }

    #[test]
    fn ssprk22_coefficients() {
        let set = embedded_set("SSPRK(2,2)").unwrap();
        assert_eq!(set.a, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        assert_eq!(set.weights[0].as_slice(), &[0.5, 0.5]);
        assert_eq!(set.weights[1].as_slice(), &[1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(set.orders, vec![2, 1]);
    }

    #[test]
    fn heun_uses_standard_third_order_weights() {
        let set = embedded_set("Heun(3,3)").unwrap();
        assert_eq!(set.weights[0].as_slice(), &[0.25, 0.0, 0.75]);
    }

    #[test]
    fn dp75_leading_weights() {
        let set = embedded_set("DP(7,5)").unwrap();
        let want = [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
            0.0,
        ];
        assert_eq!(set.weights[0].as_slice(), &want);
        assert_eq!(set.orders, vec![5, 4, 4]);
    }

    #[test]
    fn explicit_sets_are_strictly_lower_triangular() {
        for method in builtin_catalogue().values() {
            match method {
                Method::Explicit(set) => assert!(strictly_lower(&set.a), "{}", set.name),
                Method::Additive(pair) => assert!(strictly_lower(&pair.explicit), "{}", pair.name),
            }
        }
    }

    #[test]
    fn ark_parts_share_weights_and_singly_diagonal() {
        for name in ["ARK3(2)4L[2]SA", "ARK4(3)6L[2]SA"] {
            let pair = ark_pair(name).unwrap();
            let diag = pair.diagonal();
            assert_eq!(diag[0], 0.0);
            for d in &diag[1..] {
                assert_eq!(*d, diag[1]);
            }
            // The last implicit row equals the first weight row (stiffly accurate).
            let last = pair.implicit.row(pair.stages() - 1).transpose();
            assert!((last - &pair.weights[0]).amax() < 1e-15);
            for k in 0..pair.len() {
                assert!((pair.weights[k].sum() - 1.0).abs() < 1e-14);
            }
            assert!(abscissa_residual(&pair.explicit, &pair.c) < 1e-14);
            assert!(abscissa_residual(&pair.implicit, &pair.c) < 1e-14);
        }
    }

    #[test]
    fn wrong_kind_and_unknown_names() {
        assert!(matches!(
            embedded_set("ARK3(2)4L[2]SA"),
            Err(TableauError::WrongKind { .. })
        ));
        assert!(matches!(ark_pair("RK(4,4)"), Err(TableauError::WrongKind { .. })));
        assert!(matches!(embedded_set("RK(9,9)"), Err(TableauError::UnknownMethod(_))));
    }

    #[test]
    fn ssprk33_reports_orders_and_rank() {
        let report = check_embedded_set(&embedded_set("SSPRK(3,3)").unwrap());
        assert_eq!(report.verified_orders, vec![3, 2, 2]);
        // Every row has the form (x, x, 1 - 2x): only two are independent.
        assert_eq!(report.rank, 2);
        assert!(!report.passed());
    }

    #[test]
    fn duplicate_rows_are_rank_deficient() {
        let set = embedded_set("RK(4,4)").unwrap().select(&[0, 0]).unwrap();
        let report = check_embedded_set(&set);
        assert_eq!(report.rank, 1);
        assert!(report.failures.iter().any(|f| f.contains("rank deficient")));
    }

    #[test]
    fn fehlberg_full_table_orders() {
        let high = embedded_set("Fehlberg(6,5)").unwrap();
        let low = embedded_set("Fehlberg(6,4)").unwrap();
        let mut weights = high.weights.clone();
        weights.extend(low.weights[1..].iter().cloned());
        let full = EmbeddedSet {
            name: "Fehlberg table".into(),
            a: high.a.clone(),
            c: high.c.clone(),
            weights,
            orders: vec![5, 4, 3, 3],
        };
        let report = check_embedded_set(&full);
        assert_eq!(report.verified_orders, vec![5, 4, 3, 3]);
        // The two decimal rows lie in a common 3-dimensional subspace with b1, b2.
        assert_eq!(report.rank, 3);
        assert!(!report.passed());
        for rows in [[1, 2, 3], [0, 2, 3], [0, 1, 2]] {
            let sub = full.select(&rows).unwrap();
            assert_eq!(check_embedded_set(&sub).rank, 3, "{rows:?}");
        }
    }

    #[test]
    fn select_rejects_out_of_range_rows() {
        let set = embedded_set("RK(4,4)").unwrap();
        assert!(matches!(set.select(&[0, 2]), Err(TableauError::WeightIndex { .. })));
        assert_eq!(set.leading(1).unwrap().len(), 1);
    }
}
