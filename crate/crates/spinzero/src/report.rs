//! Check records and line-delimited JSON reports (schema `spinzero-report/1`).
//!
//! A report is a header line, one line per check and a summary line, each a
//! JSON object with a `"type"` of `"header"`, `"check"` or `"summary"`.
//! Check lines carry `name`, `anchor` (what is being reproduced),
//! `measured`, `expected`, `tolerance`, `relation`, `pass`, `provenance`
//! (`PAPER`, `TRIVIAL` or `DERIVED`) and `basis` (how the measured value
//! was evaluated, e.g. `quadrature` or `sampled-nodes`). A value that cannot
//! be computed on the chart at hand is reported with `expected: null` and
//! an `unavailable` reason instead of a stand-in number.

use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "spinzero-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Provenance {
    Paper,
    Trivial,
    Derived,
}

/// How `measured` is compared with `expected` and `tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `|measured - expected| <= tolerance`.
    Abs,
    /// `|measured - expected| <= tolerance |expected|`.
    Rel,
    /// `measured <= expected`.
    AtMost,
    /// `measured >= expected`.
    AtLeast,
    /// `measured` is 1 (true) or 0 (false); `expected` is 1.
    Holds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    #[serde(rename = "type")]
    pub kind: String,
    pub name: String,
    pub anchor: String,
    pub measured: Option<f64>,
    pub expected: Option<f64>,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    pub provenance: Provenance,
    pub basis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unavailable: Option<String>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Check {
    fn build(name: &str, anchor: &str, measured: f64, expected: f64, tolerance: f64, relation: Relation, provenance: Provenance) -> Check {
        let pass = measured.is_finite()
            && match relation {
                Relation::Abs => (measured - expected).abs() <= tolerance,
                Relation::Rel => (measured - expected).abs() <= tolerance * expected.abs(),
                Relation::AtMost => measured <= expected,
                Relation::AtLeast => measured >= expected,
                Relation::Holds => measured == 1.0,
            };
        Check {
            kind: "check".into(),
            name: name.into(),
            anchor: anchor.into(),
            measured: finite(measured),
            expected: finite(expected),
            tolerance,
            relation,
            pass,
            provenance,
            basis: "quadrature".into(),
            unavailable: None,
        }
    }

    pub fn abs(name: &str, anchor: &str, measured: f64, expected: f64, tol: f64, p: Provenance) -> Check {
        Self::build(name, anchor, measured, expected, tol, Relation::Abs, p)
    }

    pub fn rel(name: &str, anchor: &str, measured: f64, expected: f64, tol: f64, p: Provenance) -> Check {
        Self::build(name, anchor, measured, expected, tol, Relation::Rel, p)
    }

    pub fn at_most(name: &str, anchor: &str, measured: f64, bound: f64, p: Provenance) -> Check {
        Self::build(name, anchor, measured, bound, 0.0, Relation::AtMost, p)
    }

    pub fn at_least(name: &str, anchor: &str, measured: f64, bound: f64, p: Provenance) -> Check {
        Self::build(name, anchor, measured, bound, 0.0, Relation::AtLeast, p)
    }

    pub fn holds(name: &str, anchor: &str, ok: bool, p: Provenance) -> Check {
        Self::build(name, anchor, if ok { 1.0 } else { 0.0 }, 1.0, 0.0, Relation::Holds, p)
    }

    /// A check whose reference value does not exist on this input; it does
    /// not count as a failure.
    pub fn unavailable(name: &str, anchor: &str, measured: Option<f64>, reason: &str, p: Provenance) -> Check {
        Check {
            kind: "check".into(),
            name: name.into(),
            anchor: anchor.into(),
            measured: measured.and_then(finite),
            expected: None,
            tolerance: 0.0,
            relation: Relation::Abs,
            pass: true,
            provenance: p,
            basis: "none".into(),
            unavailable: Some(reason.into()),
        }
    }

    pub fn basis(mut self, basis: &str) -> Check {
        self.basis = basis.into();
        self
    }

    /// A failed check for a computation that raised an error.
    pub fn error(name: &str, anchor: &str, err: &crate::Error, p: Provenance) -> Check {
        let mut c = Self::build(name, anchor, f64::NAN, f64::NAN, 0.0, Relation::Holds, p);
        c.basis = format!("error: {err}");
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    #[serde(rename = "type")]
    pub kind: String,
    pub schema: String,
    pub suite: String,
    pub version: String,
    pub seed: u64,
    pub dims: Vec<usize>,
    pub resolutions: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(rename = "type")]
    pub kind: String,
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub unavailable: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub header: Header,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(suite: &str, seed: u64, dims: Vec<usize>, resolutions: Vec<usize>) -> Report {
        Report {
            header: Header {
                kind: "header".into(),
                schema: SCHEMA.into(),
                suite: suite.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed,
                dims,
                resolutions,
            },
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn summary(&self) -> Summary {
        let passed = self.checks.iter().filter(|c| c.pass).count();
        Summary {
            kind: "summary".into(),
            total: self.checks.len(),
            passed,
            failed: self.checks.len() - passed,
            unavailable: self.checks.iter().filter(|c| c.unavailable.is_some()).count(),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for c in &self.checks {
            out.push_str(&serde_json::to_string(c).expect("check serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.summary()).expect("summary serializes"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> crate::Result<Report> {
        let bad = |e: serde_json::Error| crate::Error::Config(format!("report: {e}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Header = serde_json::from_str(lines.next().ok_or_else(|| crate::Error::Config("empty report".into()))?).map_err(bad)?;
        if header.schema != SCHEMA {
            return Err(crate::Error::Config(format!("unknown schema {}", header.schema)));
        }
        let mut checks = Vec::new();
        for l in lines {
            let v: serde_json::Value = serde_json::from_str(l).map_err(bad)?;
            match v.get("type").and_then(|t| t.as_str()) {
                Some("check") => checks.push(serde_json::from_value(v).map_err(bad)?),
                Some("summary") => {}
                other => return Err(crate::Error::Config(format!("unknown record type {other:?}"))),
            }
        }
        Ok(Report { header, checks })
    }
}
