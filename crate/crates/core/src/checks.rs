//! Named checks, provenance tags, and a deterministic parallel runner.
//!
//! Every check draws its probes from a seed derived from its own name and
//! the run seed, so results do not depend on execution order.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phase_space::Probes;
use crate::report::CheckReport;
use crate::tolerances::Tolerances;

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Stated in closed form by the source material.
    Paper,
    /// Computed independently from the construction.
    Derived,
    /// Immediate by inspection.
    Trivial,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Paper => "paper",
            Provenance::Derived => "derived",
            Provenance::Trivial => "trivial",
        })
    }
}

/// Seed, tolerances and probe scaling shared by all checks of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunContext {
    pub seed: u64,
    pub tolerances: Tolerances,
    /// Multiplies every default probe count (at least one probe is kept).
    pub probe_scale: f64,
}

impl Default for RunContext {
    fn default() -> Self {
        Self::new(0)
    }
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl RunContext {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            tolerances: Tolerances::default(),
            probe_scale: 1.0,
        }
    }

    pub fn count(&self, default: usize) -> usize {
        ((default as f64 * self.probe_scale).ceil() as usize).max(1)
    }

    /// Probe batch for the check `name`.
    pub fn probes(&self, name: &str, default: usize) -> Probes {
        Probes::new(self.count(default), self.seed_for(name))
    }

    pub fn seed_for(&self, name: &str) -> u64 {
        fnv1a(name) ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }
}

pub type CheckFn = Arc<dyn Fn(&RunContext) -> Result<CheckReport> + Send + Sync>;

#[derive(Clone)]
enum Mode {
    Expect,
    /// Passes when the wrapped check fails with a residual of at least
    /// the given size (or errors out).
    Control {
        min_residual: f64,
    },
}

/// One named, self-contained numerical expectation.
#[derive(Clone)]
pub struct Check {
    pub name: String,
    pub provenance: Provenance,
    mode: Mode,
    run: CheckFn,
}

impl fmt::Debug for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Check({}, {})", self.name, self.provenance)
    }
}

impl Check {
    pub fn new<F>(name: impl Into<String>, provenance: Provenance, run: F) -> Self
    where
        F: Fn(&RunContext) -> Result<CheckReport> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            provenance,
            mode: Mode::Expect,
            run: Arc::new(run),
        }
    }

    /// A negative control: the wrapped computation is expected to fail.
    pub fn control<F>(
        name: impl Into<String>,
        provenance: Provenance,
        min_residual: f64,
        run: F,
    ) -> Self
    where
        F: Fn(&RunContext) -> Result<CheckReport> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            provenance,
            mode: Mode::Control { min_residual },
            run: Arc::new(run),
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(self.mode, Mode::Control { .. })
    }

    /// Run and name the report. Errors become failed reports (or passing
    /// ones, for controls).
    pub fn run(&self, ctx: &RunContext, scenario: &str) -> CheckReport {
        let outcome = (self.run)(ctx);
        let mut report = match (&self.mode, outcome) {
            (Mode::Expect, Ok(r)) => r,
            (Mode::Expect, Err(e)) => {
                let mut r = CheckReport::new("", 0.0);
                r.max_residual = f64::NAN;
                r.fail(e.to_string());
                r
            }
            (Mode::Control { min_residual }, Ok(inner)) => {
                let mut r = CheckReport::new("", *min_residual);
                r.probes = inner.probes;
                r.max_residual = inner.max_residual;
                r.passed = !inner.passed && inner.max_residual >= *min_residual;
                r.note(format!(
                    "control: inner check {} (tol {:.1e})",
                    inner.verdict(),
                    inner.tolerance
                ));
                r
            }
            (Mode::Control { min_residual }, Err(e)) => {
                let mut r = CheckReport::new("", *min_residual);
                r.max_residual = f64::INFINITY;
                r.note(format!("control: rejected with `{e}`"));
                r
            }
        };
        report.check = self.name.clone();
        report.scenario = scenario.to_string();
        report
    }
}

/// Checks whose names match `pattern` (a glob; `None` selects all).
pub fn select<'a>(checks: &'a [Check], pattern: Option<&str>) -> Result<Vec<&'a Check>> {
    let Some(pattern) = pattern else {
        return Ok(checks.iter().collect());
    };
    let glob = glob::Pattern::new(pattern)
        .map_err(|e| Error::Parse(format!("bad selector `{pattern}`: {e}")))?;
    let chosen: Vec<&Check> = checks.iter().filter(|c| glob.matches(&c.name)).collect();
    if chosen.is_empty() {
        return Err(Error::Unknown {
            kind: "check",
            name: pattern.to_string(),
        });
    }
    Ok(chosen)
}

/// Run the selected checks in parallel; reports come back sorted by name.
pub fn run_checks(
    checks: &[Check],
    scenario: &str,
    ctx: &RunContext,
    pattern: Option<&str>,
) -> Result<Vec<CheckReport>> {
    let chosen = select(checks, pattern)?;
    let mut reports: Vec<CheckReport> = chosen.par_iter().map(|c| c.run(ctx, scenario)).collect();
    reports.sort_by(|a, b| (&a.check, &a.scenario).cmp(&(&b.check, &b.scenario)));
    Ok(reports)
}

/// Fold several reports into one under `name`: worst residual, all probes.
pub fn merge(name: &str, tolerance: f64, parts: &[CheckReport]) -> CheckReport {
    let mut out = CheckReport::new(name, tolerance);
    for p in parts {
        out.record(p.max_residual);
        if !p.detail.is_empty() {
            out.note(p.detail.clone());
        }
    }
    out.probes = parts.iter().map(|p| p.probes).sum();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(x: f64, tol: f64) -> impl Fn(&RunContext) -> Result<CheckReport> {
        move |_| {
            let mut r = CheckReport::new("inner", tol);
            r.record(x);
            Ok(r)
        }
    }

    #[test]
    fn probe_seeds_depend_on_name_and_run_seed() {
        let a = RunContext::new(42);
        assert_eq!(a.probes("x", 10), a.probes("x", 10));
        assert_ne!(a.probes("x", 10).seed, a.probes("y", 10).seed);
        assert_ne!(
            a.probes("x", 10).seed,
            RunContext::new(43).probes("x", 10).seed
        );
        let mut half = a.clone();
        half.probe_scale = 0.01;
        assert_eq!(half.probes("x", 10).count, 1);
    }

    #[test]
    fn controls_invert_the_verdict() {
        let ctx = RunContext::default();
        let c = Check::control("c", Provenance::Derived, 0.1, residual(0.5, 1e-5));
        assert!(c.run(&ctx, "s").passed);
        let weak = Check::control("c", Provenance::Derived, 0.1, residual(1e-3, 1e-5));
        assert!(!weak.run(&ctx, "s").passed);
        let rejected = Check::control("c", Provenance::Derived, 0.1, |_| {
            Err(Error::Precondition("no".into()))
        });
        assert!(rejected.run(&ctx, "s").passed);
        let errs = Check::new("e", Provenance::Trivial, |_| Err(Error::NotSymplectic));
        let r = errs.run(&ctx, "s");
        assert!(!r.passed && r.detail.contains("symplectic"));
    }

    #[test]
    fn selection_and_sorting() {
        let checks = vec![
            Check::new("b.one", Provenance::Trivial, residual(0.0, 1.0)),
            Check::new("a.two", Provenance::Trivial, residual(2.0, 1.0)),
            Check::new("b.three", Provenance::Trivial, residual(0.0, 1.0)),
        ];
        let ctx = RunContext::default();
        let all = run_checks(&checks, "s", &ctx, None).unwrap();
        let names: Vec<&str> = all.iter().map(|r| r.check.as_str()).collect();
        assert_eq!(names, ["a.two", "b.one", "b.three"]);
        assert_eq!(
            run_checks(&checks, "s", &ctx, Some("b.*")).unwrap().len(),
            2
        );
        assert!(matches!(
            run_checks(&checks, "s", &ctx, Some("zzz*")),
            Err(Error::Unknown { kind: "check", .. })
        ));
    }
}
