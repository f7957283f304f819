//! Serialization helpers shared by the report types.

use std::io::Write;

use num_rational::BigRational;
use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::exponents::{to_f64, Branch, ExponentLedger};

/// Writes finite values as numbers and `±∞`/NaN as the strings `"inf"`,
/// `"-inf"`, `"nan"`.
pub fn ser_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// An exact rational as `"num/den"` plus its decimal value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RationalRepr {
    pub exact: String,
    pub decimal: f64,
}

impl From<&BigRational> for RationalRepr {
    fn from(r: &BigRational) -> Self {
        RationalRepr {
            exact: format!("{}/{}", r.numer(), r.denom()),
            decimal: to_f64(r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainEntryRepr {
    pub q: RationalRepr,
    pub branch: Branch,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerRepr {
    pub critical: RationalRepr,
    pub chain: Vec<ChainEntryRepr>,
    pub k0: usize,
    pub steps: usize,
    pub fixed_point: RationalRepr,
    pub closed_form_checks: usize,
    pub gamma_paper: Option<RationalRepr>,
    pub gamma_iterated: RationalRepr,
    pub nu_lower: RationalRepr,
    pub beta_paper: Option<RationalRepr>,
}

impl From<&ExponentLedger> for LedgerRepr {
    fn from(l: &ExponentLedger) -> Self {
        LedgerRepr {
            critical: (&l.critical).into(),
            chain: l
                .chain
                .iter()
                .map(|e| ChainEntryRepr {
                    q: (&e.q).into(),
                    branch: e.branch,
                })
                .collect(),
            k0: l.k0,
            steps: l.steps,
            fixed_point: (&l.fixed_point).into(),
            closed_form_checks: l.closed_form_checks,
            gamma_paper: l.gamma_paper.as_ref().map(Into::into),
            gamma_iterated: (&l.gamma_iterated).into(),
            nu_lower: (&l.nu_lower).into(),
            beta_paper: l.beta_paper.as_ref().map(Into::into),
        }
    }
}

/// Aligned plain-text rendering of a ledger.
pub fn ledger_table(l: &ExponentLedger) -> String {
    let mut rows: Vec<(String, String, String)> =
        vec![("quantity".into(), "exact".into(), "decimal".into())];
    let mut push = |name: String, r: Option<&BigRational>| {
        let (e, d) = match r {
            Some(r) => (
                format!("{}/{}", r.numer(), r.denom()),
                format!("{:.12}", to_f64(r)),
            ),
            None => ("-".into(), "-".into()),
        };
        rows.push((name, e, d));
    };
    push("critical".into(), Some(&l.critical));
    for (k, e) in l.chain.iter().enumerate() {
        push(format!("q{} ({:?})", k + 1, e.branch), Some(&e.q));
    }
    push("gamma (closed form)".into(), l.gamma_paper.as_ref());
    push("gamma (iterated)".into(), Some(&l.gamma_iterated));
    push("nu lower".into(), Some(&l.nu_lower));
    push("beta (printed)".into(), l.beta_paper.as_ref());
    let w0 = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0);
    let w1 = rows.iter().map(|r| r.1.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for (a, b, c) in &rows {
        out.push_str(&format!("{a:<w0$}  {b:>w1$}  {c}\n"));
    }
    out.push_str(&format!("k0 = {}, steps = {}\n", l.k0, l.steps));
    out
}

/// Writes a CSV table; floats use fixed scientific notation with 17
/// significant digits.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<CsvCell>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(CsvCell::render))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum CsvCell {
    Num(f64),
    Text(String),
}

impl CsvCell {
    fn render(&self) -> String {
        match self {
            CsvCell::Num(v) => format!("{v:.16e}"),
            CsvCell::Text(t) => t.clone(),
        }
    }
}
