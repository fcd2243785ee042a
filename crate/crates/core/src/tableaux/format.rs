//! Plain-text coefficient files.
//!
//! ```text
//! # comment
//! name RK(4,4)
//! kind explicit            # or `additive`
//! stages 4
//! orders 4 2               # one stated order per weight row
//! A                        # s rows
//! ...
//! A_implicit               # additive methods only, s rows
//! ...
//! b                        # one row per weight vector
//! ...
//! c                        # one row
//! ...
//! ```
//!
//! Values are rationals `p/q` or decimal strings.

use nalgebra::{DMatrix, DVector};

use super::{ArkPair, EmbeddedSet, Method, TableauError};

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    A,
    AImplicit,
    B,
    C,
}

/// Parse one coefficient value. Rationals are divided once in `f64`; with
/// numerator and denominator below 2^53 the result is correctly rounded.
pub fn parse_value(token: &str) -> Result<f64, String> {
    match token.split_once('/') {
        Some((num, den)) => {
            let num: i64 = num.parse().map_err(|_| format!("bad numerator in `{token}`"))?;
            let den: i64 = den.parse().map_err(|_| format!("bad denominator in `{token}`"))?;
            if den == 0 {
                return Err(format!("zero denominator in `{token}`"));
            }
            Ok(num as f64 / den as f64)
        }
        None => token.parse().map_err(|_| format!("bad value `{token}`")),
    }
}

pub fn parse_method(text: &str) -> Result<Method, TableauError> {
    let mut name = None;
    let mut kind = None;
    let mut stages = None;
    let mut orders = Vec::new();
    let mut a = Vec::new();
    let mut a_implicit = Vec::new();
    let mut b = Vec::new();
    let mut c = Vec::new();
    let mut section = Section::Header;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: String| TableauError::Parse { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        match head {
            "name" => {
                name = Some(line["name".len()..].trim().to_string());
                continue;
            }
            "kind" => {
                kind = Some(tokens.next().unwrap_or_default().to_string());
                continue;
            }
            "stages" => {
                let s = tokens.next().unwrap_or_default();
                stages = Some(s.parse::<usize>().map_err(|_| err(format!("bad stage count `{s}`")))?);
                continue;
            }
            "orders" => {
                orders = tokens
                    .map(|t| t.parse::<usize>().map_err(|_| err(format!("bad order `{t}`"))))
                    .collect::<Result<_, _>>()?;
                continue;
            }
            "A" => {
                section = Section::A;
                continue;
            }
            "A_implicit" => {
                section = Section::AImplicit;
                continue;
            }
            "b" => {
                section = Section::B;
                continue;
            }
            "c" => {
                section = Section::C;
                continue;
            }
            _ => {}
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_value(t).map_err(&err))
            .collect::<Result<_, _>>()?;
        match section {
            Section::Header => return Err(err(format!("unexpected data row `{line}`"))),
            Section::A => a.push(row),
            Section::AImplicit => a_implicit.push(row),
            Section::B => b.push(row),
            Section::C => c.push(row),
        }
    }

    let header_err = |msg: &str| TableauError::Parse {
        line: 0,
        msg: msg.to_string(),
    };
    let name = name.ok_or_else(|| header_err("missing `name`"))?;
    let s = stages.ok_or_else(|| header_err("missing `stages`"))?;
    let kind = kind.ok_or_else(|| header_err("missing `kind`"))?;
    if b.is_empty() {
        return Err(header_err("no weight rows"));
    }
    if orders.len() != b.len() {
        return Err(header_err("one stated order per weight row required"));
    }
    if c.len() != 1 {
        return Err(header_err("exactly one abscissa row required"));
    }
    let square = |rows: &[Vec<f64>], what: &str| -> Result<DMatrix<f64>, TableauError> {
        if rows.len() != s || rows.iter().any(|r| r.len() != s) {
            return Err(header_err(&format!("{what} must be {s}x{s}")));
        }
        Ok(DMatrix::from_fn(s, s, |i, j| rows[i][j]))
    };
    let vector = |row: &Vec<f64>, what: &str| -> Result<DVector<f64>, TableauError> {
        if row.len() != s {
            return Err(header_err(&format!("{what} must have {s} entries")));
        }
        Ok(DVector::from_column_slice(row))
    };

    let a = square(&a, "A")?;
    let c = vector(&c[0], "c")?;
    let weights = b
        .iter()
        .map(|row| vector(row, "weight row"))
        .collect::<Result<Vec<_>, _>>()?;

    match kind.as_str() {
        "explicit" => {
            if !a_implicit.is_empty() {
                return Err(header_err("explicit method with an A_implicit section"));
            }
            Ok(Method::Explicit(EmbeddedSet {
                name,
                a,
                c,
                weights,
                orders,
            }))
        }
        "additive" => Ok(Method::Additive(ArkPair {
            name,
            explicit: a,
            implicit: square(&a_implicit, "A_implicit")?,
            c,
            weights,
            orders,
        })),
        other => Err(header_err(&format!("unknown kind `{other}`"))),
    }
}
