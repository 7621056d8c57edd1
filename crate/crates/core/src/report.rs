//! Check reports and their CSV serialization.

use std::io::Write;

use serde::Serialize;

/// Outcome of one numerical check: the largest residual seen over a batch
/// of probes, compared against a tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub scenario: String,
    pub probes: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Free-form detail (dimensions found, failing probe). Not part of the CSV.
    #[serde(skip)]
    pub detail: String,
    #[serde(skip)]
    forced_failure: bool,
}

impl CheckReport {
    pub fn new(check: impl Into<String>, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            scenario: String::new(),
            probes: 0,
            max_residual: 0.0,
            tolerance,
            passed: true,
            detail: String::new(),
            forced_failure: false,
        }
    }

    pub fn with_scenario(mut self, scenario: impl Into<String>) -> Self {
        self.scenario = scenario.into();
        self
    }

    /// Record one probe residual. NaN residuals fail the check.
    pub fn record(&mut self, residual: f64) {
        self.probes += 1;
        if residual.is_nan() {
            self.max_residual = f64::NAN;
        } else if !self.max_residual.is_nan() {
            self.max_residual = self.max_residual.max(residual);
        }
        self.passed = !self.forced_failure && self.max_residual <= self.tolerance;
    }

    /// Force a failure regardless of residuals (dimension mismatch and the like).
    pub fn fail(&mut self, why: impl Into<String>) {
        self.passed = false;
        self.forced_failure = true;
        self.note(why);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(&text.into());
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }

    pub fn text_line(&self) -> String {
        let mut line = format!(
            "{:<6} {:<40} probes={:<5} max_residual={:.3e} tol={:.1e}",
            self.verdict().to_uppercase(),
            self.check,
            self.probes,
            self.max_residual,
            self.tolerance
        );
        if !self.detail.is_empty() {
            line.push_str("  [");
            line.push_str(&self.detail);
            line.push(']');
        }
        line
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub const CSV_HEADER: [&str; 6] = [
    "check",
    "scenario",
    "probes",
    "max_residual",
    "tolerance",
    "verdict",
];

/// Write reports as CSV rows sorted by check name (then scenario).
pub fn write_csv<W: Write>(out: W, reports: &[CheckReport]) -> csv::Result<()> {
    let mut sorted: Vec<&CheckReport> = reports.iter().collect();
    sorted.sort_by(|a, b| (&a.check, &a.scenario).cmp(&(&b.check, &b.scenario)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in sorted {
        w.write_record([
            r.check.as_str(),
            r.scenario.as_str(),
            &r.probes.to_string(),
            &format_float(r.max_residual),
            &format_float(r.tolerance),
            r.verdict(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(reports: &[CheckReport]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, reports).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}
