use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// One check. `lhs`/`rhs` are the two sides being compared when the check is a
/// comparison; `reason` is set for skipped checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub status: Status,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub abs_error: Option<f64>,
    pub rel_error: Option<f64>,
    pub detail: String,
    pub reason: Option<String>,
}

impl CheckRecord {
    pub fn passed(name: &str, detail: impl Into<String>) -> Self {
        Self::flag(name, true, detail)
    }

    pub fn flag(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        CheckRecord {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            lhs: None,
            rhs: None,
            abs_error: None,
            rel_error: None,
            detail: detail.into(),
            reason: None,
        }
    }

    /// Pass when |lhs − rhs| / max(1, |rhs|) < tol.
    pub fn compare(name: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let abs = (lhs - rhs).abs();
        let rel = abs / rhs.abs().max(1.0);
        CheckRecord {
            name: name.into(),
            status: if rel < tol { Status::Pass } else { Status::Fail },
            lhs: Some(lhs),
            rhs: Some(rhs),
            abs_error: Some(abs),
            rel_error: Some(rel),
            detail: format!("tol {tol:e}"),
            reason: None,
        }
    }

    pub fn residual(name: &str, residual: f64, tol: f64, detail: impl Into<String>) -> Self {
        let mut r = Self::flag(name, residual <= tol, detail);
        r.abs_error = Some(residual);
        r
    }

    pub fn skipped(name: &str, reason: impl Into<String>) -> Self {
        CheckRecord {
            name: name.into(),
            status: Status::Skipped,
            lhs: None,
            rhs: None,
            abs_error: None,
            rel_error: None,
            detail: String::new(),
            reason: Some(reason.into()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Totals {
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
}

/// Per fixed point term of a localization patch.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointRecord {
    pub patch: String,
    pub point: Vec<(String, String)>,
    pub integrand0: f64,
    pub half_det: f64,
    pub value: f64,
    pub symbolic: Option<String>,
}

/// Wall-clock data. Everything nondeterministic in a report lives here.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub total_ms: f64,
    pub checks_ms: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub command: String,
    pub scenario_hash: String,
    pub status: Status,
    pub records: Vec<CheckRecord>,
    pub totals: Totals,
    /// Named results: `localized`, `oracle`, `expected`.
    pub values: BTreeMap<String, f64>,
    pub contributions: Vec<PointRecord>,
    pub timing: Timing,
}

impl Report {
    /// 0 when every non-skipped check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.totals.fail == 0 {
            0
        } else {
            1
        }
    }

    pub fn record(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Pretty JSON; keys of every map are sorted, struct fields keep declaration order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The JSON report with the `timing` object removed, for determinism checks.
    pub fn to_json_without_timing(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("timing");
        }
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    /// One line per check, then a totals line.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let status = match r.status {
                Status::Pass => "pass",
                Status::Fail => "FAIL",
                Status::Skipped => "skip",
            };
            let mut line = format!("{status:4}  {}", r.name);
            match (r.lhs, r.rhs) {
                (Some(l), Some(rh)) => line += &format!("  lhs {l:.12e}  rhs {rh:.12e}"),
                (Some(l), None) => line += &format!("  value {l:.12e}"),
                _ => {}
            }
            if let Some(e) = r.rel_error.or(r.abs_error) {
                line += &format!("  err {e:.3e}");
            }
            if let Some(reason) = &r.reason {
                line += &format!("  ({reason})");
            } else if r.status == Status::Fail && !r.detail.is_empty() {
                line += &format!("  {}", r.detail);
            }
            out += &line;
            out.push('\n');
        }
        for (k, v) in &self.values {
            out += &format!("{k} = {v:.15e}\n");
        }
        out += &format!(
            "{}: {} pass, {} fail, {} skipped\n",
            self.scenario, self.totals.pass, self.totals.fail, self.totals.skipped
        );
        out
    }
}
