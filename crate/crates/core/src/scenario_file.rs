//! User-authored scenarios in TOML.
//!
//! ```toml
//! name = "cylinder"
//! summary = "T*S¹ with the angle shift"
//!
//! [chart]
//! coords = ["q", "p"]
//! periods = { q = 6.283185307179586 }
//!
//! [poisson]
//! form = [["0", "1"], ["-1", "0"]]      # or `tensor = ...`; entries are expressions
//!
//! [action]
//! name = "S1"
//! kind = "translation"                   # translation | torus | finite | matrix
//! directions = [[1.0, 0.0]]
//! periods = [6.283185307179586]          # 0 for a non-compact direction
//!
//! [invariants]
//! p = "p"
//!
//! [signatures]
//! p = "p"                                # or { expr = "...", period = ... }
//!
//! [expectations]
//! rank = [{ at = [0.3, 1.0], value = 1 }]
//! label = [{ at = [0.3, 1.0], value = [1.0] }]
//! bracket = [{ f = "p", g = "p^2", at = [0.3, 1.0], value = 0.0 }]
//! orbit = [{ a = [0.1, 1.0], b = [2.0, 1.0], expect = "yes" }]
//! ```
//!
//! Derivatives of expressions are taken by finite differences.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use crate::checks::{Check, Provenance};
use crate::distribution::{same_orbit, ConservedQuantity, OrbitAnswer, OrbitSearch};
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::group_action::{classical_momentum, GroupAction};
use crate::linalg::{Matrix, Vector};
use crate::optimal_momentum::{
    build_characteristic, label_at, LabelSpec, QuotientAction, Signature,
};
use crate::phase_space::{bracket_at, Chart, PoissonStructure, Probes, SmoothMap};
use crate::report::CheckReport;
use crate::scenarios::{rank_report, ActionCase, Scenario, INVARIANCE_SAMPLES};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSpec {
    name: String,
    #[serde(default)]
    summary: String,
    chart: ChartSpec,
    poisson: PoissonSpec,
    action: ActionSpec,
    invariants: BTreeMap<String, String>,
    #[serde(default)]
    signatures: BTreeMap<String, SignatureSpec>,
    #[serde(default)]
    expectations: Expectations,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChartSpec {
    coords: Vec<String>,
    #[serde(default)]
    periods: BTreeMap<String, f64>,
    radius: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Entry {
    Num(f64),
    Expr(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoissonSpec {
    form: Option<Vec<Vec<Entry>>>,
    tensor: Option<Vec<Vec<Entry>>>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ActionKind {
    Translation,
    Torus,
    Finite,
    Matrix,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionSpec {
    name: String,
    kind: ActionKind,
    /// Translation directions, one vector each.
    directions: Option<Vec<Vec<f64>>>,
    periods: Option<Vec<f64>>,
    /// Torus: rotated coordinate pairs and integer weights (one row per pair).
    pairs: Option<Vec<[usize; 2]>>,
    weights: Option<Vec<Vec<i64>>>,
    /// Finite group elements or Lie algebra basis, as row-major matrices.
    elements: Option<Vec<Vec<Vec<f64>>>>,
    generators: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default = "yes")]
    proper: bool,
    #[serde(default = "yes")]
    canonical: bool,
    /// Components of a momentum map, if one is claimed.
    momentum: Option<Vec<String>>,
    horizon: Option<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SignatureSpec {
    Plain(String),
    Full { expr: String, period: Option<f64> },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Expectations {
    #[serde(default)]
    rank: Vec<RankExpect>,
    #[serde(default)]
    label: Vec<LabelExpect>,
    #[serde(default)]
    bracket: Vec<BracketExpect>,
    #[serde(default)]
    orbit: Vec<OrbitExpect>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RankExpect {
    at: Vec<f64>,
    value: usize,
    provenance: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelExpect {
    at: Vec<f64>,
    value: Vec<f64>,
    provenance: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BracketExpect {
    f: String,
    g: String,
    at: Vec<f64>,
    value: f64,
    provenance: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OrbitExpect {
    a: Vec<f64>,
    b: Vec<f64>,
    expect: String,
    budget: Option<f64>,
    provenance: Option<String>,
}

fn provenance(p: &Option<String>) -> Result<Provenance> {
    match p.as_deref() {
        None | Some("derived") => Ok(Provenance::Derived),
        Some("paper") => Ok(Provenance::Paper),
        Some("trivial") => Ok(Provenance::Trivial),
        Some(other) => Err(Error::Unknown {
            kind: "provenance",
            name: other.to_string(),
        }),
    }
}

fn point(v: &[f64], n: usize) -> Result<Vector> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    Ok(Vector::from_column_slice(v))
}

fn square(rows: &[Vec<f64>], n: usize) -> Result<Matrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("expected a {n}×{n} matrix")));
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn function(name: &str, src: &str, coords: &[String]) -> Result<SmoothMap> {
    let e = expr::parse(src, coords)?;
    Ok(SmoothMap::scalar(name, coords.len(), move |z| {
        e.eval(z.as_slice())
    }))
}

/// Matrix field from expression entries; `None` when every entry is constant.
fn matrix_field(
    rows: &[Vec<Entry>],
    coords: &[String],
) -> Result<(Vec<Vec<Expr>>, Option<Matrix>)> {
    let n = coords.len();
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("expected a {n}×{n} matrix")));
    }
    let exprs = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|e| match e {
                    Entry::Num(v) => Ok(Expr::Num(*v)),
                    Entry::Expr(s) => expr::parse(s, coords),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let constant = exprs
        .iter()
        .flatten()
        .all(Expr::is_constant)
        .then(|| Matrix::from_fn(n, n, |i, j| exprs[i][j].eval(&[])));
    Ok((exprs, constant))
}

fn eval_matrix(exprs: &[Vec<Expr>], z: &Vector) -> Matrix {
    let n = exprs.len();
    Matrix::from_fn(n, n, |i, j| exprs[i][j].eval(z.as_slice()))
}

fn build_poisson(
    spec: &PoissonSpec,
    chart: &Arc<Chart>,
    coords: &[String],
) -> Result<PoissonStructure> {
    match (&spec.form, &spec.tensor) {
        (Some(rows), None) => {
            let (exprs, constant) = matrix_field(rows, coords)?;
            match constant {
                Some(m) => PoissonStructure::constant_symplectic(chart.clone(), m),
                None => Ok(PoissonStructure::from_form(chart.clone(), move |z| {
                    eval_matrix(&exprs, z)
                })),
            }
        }
        (None, Some(rows)) => {
            let (exprs, constant) = matrix_field(rows, coords)?;
            match constant {
                Some(m) => PoissonStructure::constant_poisson(chart.clone(), m),
                None => Ok(PoissonStructure::from_tensor(chart.clone(), move |z| {
                    eval_matrix(&exprs, z)
                })),
            }
        }
        _ => Err(Error::Parse(
            "[poisson] needs exactly one of `form` or `tensor`".into(),
        )),
    }
}

fn missing(field: &str) -> Error {
    Error::Parse(format!("[action] lacks `{field}`"))
}

fn build_action(spec: &ActionSpec, chart: &Arc<Chart>) -> Result<GroupAction> {
    let n = chart.dim();
    let a = match spec.kind {
        ActionKind::Translation => {
            let dirs = spec
                .directions
                .as_ref()
                .ok_or_else(|| missing("directions"))?;
            if dirs.iter().any(|d| d.len() != n) {
                return Err(Error::Parse(format!(
                    "translation directions need {n} entries"
                )));
            }
            let m = Matrix::from_fn(n, dirs.len(), |i, j| dirs[j][i]);
            let periods = match &spec.periods {
                Some(p) => p.iter().map(|&t| (t > 0.0).then_some(t)).collect(),
                None => vec![None; dirs.len()],
            };
            GroupAction::translation(&spec.name, chart.clone(), m, periods)?
        }
        ActionKind::Torus => {
            let pairs = spec.pairs.as_ref().ok_or_else(|| missing("pairs"))?;
            let weights = spec.weights.clone().ok_or_else(|| missing("weights"))?;
            GroupAction::torus(
                &spec.name,
                chart.clone(),
                pairs.iter().map(|p| (p[0], p[1])).collect(),
                weights,
            )?
        }
        ActionKind::Finite => {
            let els = spec.elements.as_ref().ok_or_else(|| missing("elements"))?;
            let mats = els.iter().map(|m| square(m, n)).collect::<Result<_>>()?;
            GroupAction::finite(&spec.name, chart.clone(), mats)?
        }
        ActionKind::Matrix => {
            let gens = spec
                .generators
                .as_ref()
                .ok_or_else(|| missing("generators"))?;
            let mats = gens.iter().map(|m| square(m, n)).collect::<Result<_>>()?;
            GroupAction::matrix_lie(&spec.name, chart.clone(), mats)?
        }
    };
    Ok(a.proper(spec.proper))
}

/// Parse a scenario from TOML text.
pub fn parse_str(text: &str) -> Result<Scenario> {
    let spec: FileSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    build(spec)
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_str(&text)
}

fn build(spec: FileSpec) -> Result<Scenario> {
    let coords = spec.chart.coords.clone();
    let n = coords.len();
    if n == 0 {
        return Err(Error::Parse("[chart] needs at least one coordinate".into()));
    }
    for name in spec.chart.periods.keys() {
        if !coords.contains(name) {
            return Err(Error::Unknown {
                kind: "coordinate",
                name: name.clone(),
            });
        }
    }
    let periods = coords
        .iter()
        .map(|c| spec.chart.periods.get(c).copied())
        .collect();
    let mut chart = Chart::with_periods(format!("{}:chart", spec.name), periods);
    if let Some(r) = spec.chart.radius {
        chart = chart.sample_radius(r);
    }
    let chart = Arc::new(chart);
    let poisson = build_poisson(&spec.poisson, &chart, &coords)?;
    let action = build_action(&spec.action, &chart)?;
    let tag = action.name().to_string();

    let sigma = spec
        .invariants
        .iter()
        .map(|(name, src)| Ok(function(name, src, &coords)?.tagged(tag.as_str())))
        .collect::<Result<Vec<_>>>()?;
    let labels = spec
        .signatures
        .iter()
        .map(|(name, s)| {
            Ok(match s {
                SignatureSpec::Plain(src) => ConservedQuantity::new(function(name, src, &coords)?),
                SignatureSpec::Full { expr, period: None } => {
                    ConservedQuantity::new(function(name, expr, &coords)?)
                }
                SignatureSpec::Full {
                    expr,
                    period: Some(p),
                } => ConservedQuantity::periodic(function(name, expr, &coords)?, *p),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let e = build_characteristic(
        &action,
        &poisson,
        sigma,
        &Probes::new(INVARIANCE_SAMPLES, 0),
    )?
    .with_labels(LabelSpec::components(labels));
    let momentum = match &spec.action.momentum {
        Some(components) => {
            let maps = components
                .iter()
                .enumerate()
                .map(|(i, src)| function(&format!("J{i}"), src, &coords))
                .collect::<Result<Vec<_>>>()?;
            Some(classical_momentum(
                &action,
                &poisson,
                Some(maps),
                &Probes::new(20, 0),
                crate::tolerances::TOL_MAP,
            )?)
        }
        None => None,
    };

    let mut s = Scenario::new(spec.name.clone(), spec.summary.clone());
    let case = s.add_case(ActionCase {
        key: "main".into(),
        e,
        momentum,
        quotient_action: QuotientAction::Undeclared,
        reductions: Vec::new(),
        horizon: spec.action.horizon.unwrap_or(1.0),
        canonical: spec.action.canonical,
    });

    let ex = &spec.expectations;
    for (i, r) in ex.rank.iter().enumerate() {
        let (c, z, want) = (case.clone(), point(&r.at, n)?, r.value);
        s.push(Check::new(
            format!("expect.rank.{i}"),
            provenance(&r.provenance)?,
            move |_| Ok(rank_report("", &c, std::slice::from_ref(&z), want)),
        ));
    }
    for (i, l) in ex.label.iter().enumerate() {
        let (c, z, want) = (case.clone(), point(&l.at, n)?, l.value.clone());
        s.push(Check::new(
            format!("expect.label.{i}"),
            provenance(&l.provenance)?,
            move |ctx| {
                let label = label_at(&c.e, &z)?;
                let Signature::Values(got) = &label.signature else {
                    return Err(Error::Validation("label has no component values".into()));
                };
                if got.len() != want.len() {
                    return Err(Error::DimensionMismatch {
                        expected: want.len(),
                        found: got.len(),
                    });
                }
                let mut r = CheckReport::new("", ctx.tolerances.reach);
                r.record(
                    label
                        .signature
                        .distance(&Signature::Values(want.clone()), c.e.labels()?),
                );
                Ok(r)
            },
        ));
    }
    for (i, b) in ex.bracket.iter().enumerate() {
        let (c, z, want) = (case.clone(), point(&b.at, n)?, b.value);
        let f = function("f", &b.f, &coords)?;
        let g = function("g", &b.g, &coords)?;
        s.push(Check::new(
            format!("expect.bracket.{i}"),
            provenance(&b.provenance)?,
            move |ctx| {
                let got = bracket_at(c.e.poisson(), &f, &g, &z)?;
                let mut r = CheckReport::new("", ctx.tolerances.fd * (1.0 + want.abs()));
                r.record((got - want).abs());
                Ok(r)
            },
        ));
    }
    for (i, o) in ex.orbit.iter().enumerate() {
        let c = case.clone();
        let (a, b) = (chart.point(point(&o.a, n)?)?, chart.point(point(&o.b, n)?)?);
        let want = match o.expect.as_str() {
            "yes" => true,
            "no" => false,
            other => {
                return Err(Error::Parse(format!(
                    "orbit expectation must be `yes` or `no`, not `{other}`"
                )))
            }
        };
        let budget = o.budget.unwrap_or(100.0);
        s.push(Check::new(
            format!("expect.orbit.{i}"),
            provenance(&o.provenance)?,
            move |ctx| {
                let search = OrbitSearch {
                    budget,
                    seed: ctx.seed_for("expect.orbit"),
                    tol_reach: ctx.tolerances.reach,
                    ..OrbitSearch::default()
                };
                let invariants =
                    c.e.labels()
                        .map(|l| l.components.clone())
                        .unwrap_or_default();
                let answer = same_orbit(c.e.base(), &a, &b, &invariants, &search)?;
                let ok = matches!(
                    (&answer, want),
                    (OrbitAnswer::Yes(_), true) | (OrbitAnswer::No(_), false)
                );
                let mut r = CheckReport::new("", 0.0);
                r.record(if ok { 0.0 } else { 1.0 });
                Ok(r)
            },
        ));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::RunContext;

    const CYLINDER: &str = r#"
name = "cylinder"
[chart]
coords = ["q", "p"]
periods = { q = 6.283185307179586 }
[poisson]
form = [[0, 1], [-1, 0]]
[action]
name = "S1"
kind = "translation"
directions = [[1.0, 0.0]]
periods = [6.283185307179586]
[invariants]
p = "p"
[signatures]
p = "p"
[expectations]
rank = [{ at = [0.3, 1.0], value = 1 }]
label = [{ at = [0.3, 1.0], value = [1.0] }]
bracket = [{ f = "sin(q)", g = "p", at = [0.0, 1.0], value = 1.0 }]
orbit = [{ a = [0.1, 1.0], b = [2.0, 1.0], expect = "yes" }, { a = [0.1, 1.0], b = [0.1, 2.0], expect = "no" }]
"#;

    #[test]
    fn cylinder_passes() {
        let s = parse_str(CYLINDER).unwrap();
        let reports = s.run(&RunContext::new(1), Some("expect.*")).unwrap();
        assert_eq!(reports.len(), 5);
        for r in &reports {
            assert!(r.passed, "{}", r.text_line());
        }
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(matches!(parse_str("name = 1"), Err(Error::Parse(_))));
        let wrong_invariant =
            CYLINDER.replace("p = \"p\"\n[signatures]", "p = \"q\"\n[signatures]");
        assert!(matches!(
            parse_str(&wrong_invariant),
            Err(Error::Validation(_))
        ));
        let unknown_coord = CYLINDER.replace("sin(q)", "sin(r)");
        assert!(matches!(
            parse_str(&unknown_coord),
            Err(Error::Unknown { .. })
        ));
        let both = CYLINDER.replace("[poisson]\n", "[poisson]\ntensor = [[0, 1], [-1, 0]]\n");
        assert!(parse_str(&both).is_err());
    }
}
