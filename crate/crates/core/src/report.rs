//! Verification reports: per-case records, fitted constants, and the CSV /
//! JSON writers with fixed 10-significant-digit numeric formatting.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// One measured case of a check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    /// Radius of the case, NaN when not meaningful.
    pub r: f64,
    /// Secondary scale (upper radius, sample index), NaN when not meaningful.
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub status: String,
}

impl CaseResult {
    pub fn ok(case_id: impl Into<String>, r: f64, t: f64, lhs: f64, rhs: f64, ratio: f64) -> Self {
        CaseResult {
            case_id: case_id.into(),
            r,
            t,
            lhs,
            rhs,
            ratio,
            status: "ok".into(),
        }
    }

    pub fn skipped(case_id: impl Into<String>, r: f64, t: f64, reason: &str) -> Self {
        CaseResult {
            case_id: case_id.into(),
            r,
            t,
            lhs: f64::NAN,
            rhs: f64::NAN,
            ratio: f64::NAN,
            status: format!("skip:{reason}"),
        }
    }
}

/// Outcome of one check: the empirical constant and its stability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check_name: String,
    pub cases: Vec<CaseResult>,
    /// Max ratio over the accepted cases.
    pub fitted_constant: f64,
    /// Same quantity after one refinement (grid, family, or horizon),
    /// NaN when the check has no refinement axis.
    pub refined_constant: f64,
    /// Relative growth of the constant under refinement.
    pub growth: f64,
    pub pass: bool,
    pub runtime_ms: u128,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl VerificationReport {
    /// Max ratio over cases with an "ok" status.
    pub fn fitted_from_cases(cases: &[CaseResult]) -> f64 {
        cases
            .iter()
            .filter(|c| c.status == "ok")
            .map(|c| c.ratio)
            .fold(0.0, f64::max)
    }
}

/// Format with exactly 10 significant digits; inf/nan spelled out.
pub fn fmt_sig10(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.9e}")
    }
}

fn round_sig10(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.9e}").parse().unwrap_or(x)
    } else {
        x
    }
}

/// Round every number in a JSON tree to 10 significant digits.
pub fn round_json(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig10(f)) {
                        *n = rounded;
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Serialize reports to pretty JSON with rounded numerics and an optional
/// timestamp field.
pub fn reports_to_json(reports: &[VerificationReport], timestamp: Option<u64>) -> Result<String> {
    let mut value = serde_json::json!({
        "reports": reports,
        "all_pass": reports.iter().all(|r| r.pass),
    });
    if let Some(ts) = timestamp {
        value["generated_at_unix"] = serde_json::json!(ts);
    }
    round_json(&mut value);
    serde_json::to_string_pretty(&value)
        .map_err(|e| Error::Internal(format!("report serialization: {e}")))
}

/// Flat CSV: `check_name,case_id,r,t,lhs,rhs,ratio,status`, preceded by an
/// optional `# generated_at_unix` comment line.
pub fn reports_to_csv(reports: &[VerificationReport], timestamp: Option<u64>) -> String {
    let mut out = String::new();
    if let Some(ts) = timestamp {
        out.push_str(&format!("# generated_at_unix {ts}\n"));
    }
    out.push_str("check_name,case_id,r,t,lhs,rhs,ratio,status\n");
    for report in reports {
        for c in &report.cases {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                report.check_name,
                c.case_id,
                fmt_sig10(c.r),
                fmt_sig10(c.t),
                fmt_sig10(c.lhs),
                fmt_sig10(c.rhs),
                fmt_sig10(c.ratio),
                c.status
            ));
        }
    }
    out
}

/// Write atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut file = std::fs::File::create(&tmp)
        .map_err(|e| Error::Internal(format!("create {}: {e}", tmp.display())))?;
    file.write_all(contents.as_bytes())
        .map_err(|e| Error::Internal(format!("write {}: {e}", tmp.display())))?;
    file.sync_all().ok();
    std::fs::rename(&tmp, path)
        .map_err(|e| Error::Internal(format!("rename to {}: {e}", path.display())))?;
    Ok(())
}
