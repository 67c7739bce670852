//! Report rows and their CSV / JSON serialization.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub suite: String,
    pub case: String,
    pub resolution: String,
    #[serde(with = "nan_as_null")]
    pub measured: f64,
    #[serde(with = "nan_as_null")]
    pub reference: f64,
    #[serde(with = "nan_as_null")]
    pub error: f64,
    #[serde(with = "nan_as_null")]
    pub tolerance: f64,
    /// Observed convergence order against the previous resolution of the same case.
    pub order: Option<f64>,
    pub pass: bool,
}

impl ReportRow {
    /// Row whose pass flag is `error ≤ tolerance`.
    pub fn new(
        suite: &str,
        case: &str,
        resolution: impl Into<String>,
        measured: f64,
        reference: f64,
        error: f64,
        tolerance: f64,
    ) -> Self {
        ReportRow {
            suite: suite.to_string(),
            case: case.to_string(),
            resolution: resolution.into(),
            measured,
            reference,
            error,
            tolerance,
            order: None,
            pass: error <= tolerance,
        }
    }

    /// Row for a check with a boolean outcome; error is 0 on success and 1 otherwise.
    pub fn check(suite: &str, case: &str, resolution: impl Into<String>, measured: f64, ok: bool) -> Self {
        let mut row = ReportRow::new(suite, case, resolution, measured, f64::NAN, if ok { 0.0 } else { 1.0 }, 0.0);
        row.reference = measured;
        row
    }

    pub fn with_order(mut self, order: Option<f64>) -> Self {
        self.order = order;
        self
    }
}

/// JSON has no NaN; it travels as `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

/// Float with 17 significant digits, empty for NaN.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

pub const CSV_HEADER: &str = "suite,case,resolution,measured,reference,error,tolerance,order,pass";

pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.suite,
            r.case,
            r.resolution,
            fmt_f64(r.measured),
            fmt_f64(r.reference),
            fmt_f64(r.error),
            fmt_f64(r.tolerance),
            r.order.map(fmt_f64).unwrap_or_default(),
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    out
}

pub fn to_json(rows: &[ReportRow]) -> Result<String> {
    Ok(serde_json::to_string_pretty(rows)?)
}

pub fn from_json(s: &str) -> Result<Vec<ReportRow>> {
    Ok(serde_json::from_str(s)?)
}

/// Write rows to `path` in one piece.
pub fn emit_report(rows: &[ReportRow], format: Format, path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config("no report rows to write".into()));
    }
    let body = match format {
        Format::Csv => to_csv(rows),
        Format::Json => to_json(rows)?,
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

/// `log2(coarse / fine)`; `None` unless both errors are positive and finite.
pub fn observed_order(coarse: f64, fine: f64) -> Option<f64> {
    if coarse > 0.0 && fine > 0.0 && coarse.is_finite() && fine.is_finite() {
        Some((coarse / fine).log2())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<ReportRow> {
        vec![
            ReportRow::new("geometry", "sphere/H", "64x64", -2.5, -2.0, 0.5, 1.0).with_order(Some(4.01)),
            ReportRow::check("verify", "radial/singular", "-", 1.0, true),
        ]
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let rows = sample();
        let csv = to_csv(&rows[..1]);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with(CSV_HEADER));
        assert!(csv.contains("-2.5000000000000000e0"));
    }

    #[test]
    fn emitting_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        emit_report(&sample(), Format::Csv, &a).unwrap();
        emit_report(&sample(), Format::Csv, &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn json_round_trips() {
        let rows = vec![sample().remove(0)];
        let back = from_json(&to_json(&rows).unwrap()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn empty_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&[], Format::Csv, &dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn pass_iff_error_within_tolerance() {
        assert!(ReportRow::new("s", "c", "r", 0.0, 0.0, 1e-3, 1e-3).pass);
        assert!(!ReportRow::new("s", "c", "r", 0.0, 0.0, 2e-3, 1e-3).pass);
    }
}
