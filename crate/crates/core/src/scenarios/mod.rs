//! Built-in scenarios: closed-form examples with their declared
//! expectations, each runnable as a self-test.
//!
//! A scenario holds one or more [`ActionCase`]s (an action with its
//! characteristic distribution and labels) and a flat list of named
//! [`Check`]s. Generic checks are generated per case and named
//! `<family>.<case>`; scenario-specific expectations are added by hand.

use std::sync::Arc;

use crate::checks::{merge, run_checks, Check, Provenance, RunContext};
use crate::distribution::{check_involutivity, OrbitSearch, WordSampler};
use crate::error::{Error, Result};
use crate::group_action::{
    check_action_axioms, check_generators, check_noether_classical, classical_momentum,
    fixed_dual_isomorphism_check, invariant_differential_span_check, is_canonical,
    validate_invariance, ClassicalMomentumMap, GroupAction,
};
use crate::linalg::{Matrix, Vector};
use crate::optimal_momentum::{
    check_eq34, check_isotropy_along_words, check_label_flow_invariance, check_optimal_noether,
    check_poisson_distribution, check_quotient_bracket, check_signature_conserved,
    check_universality, induced_action_check, random_quadratic, CharacteristicDistribution,
    QuotientAction,
};
use crate::phase_space::{Probes, SmoothMap};
use crate::reduction::{
    check_level_set_closed, check_reduced_closed, check_reduced_energy, isotropy_of_label,
    mw_reduce_compare, reduce_dynamics, reduced_bracket_check, reduced_form, validate_level_set,
    LevelSetModel, MwSetup, ReducedChart,
};
use crate::report::CheckReport;

mod c3;
mod fixtures;
mod r3;
mod torus;
mod z2;

pub use c3::{c3, mixing_hamiltonians, su3_generators, su3_stabilizer, S1 as C3_S1};
pub use fixtures::fixtures;
pub use r3::{r3, tensor as r3_tensor};
pub use torus::torus;
pub use z2::z2;

/// Samples used to validate invariance tags when a scenario is built.
pub const INVARIANCE_SAMPLES: usize = 500;

/// A designated label with its level set, reduced chart and data for the
/// reduced-dynamics checks.
#[derive(Clone, Debug)]
pub struct ReductionCase {
    pub name: String,
    pub level: LevelSetModel,
    pub chart: ReducedChart,
    /// The subgroup preserving the label.
    pub g_rho: GroupAction,
    pub mw: Option<MwSetup>,
    /// Invariant Hamiltonians to reduce; the first two also feed the
    /// reduced-bracket check.
    pub hamiltonians: Vec<SmoothMap>,
    pub expected_dim: usize,
}

/// One action on a scenario's phase space.
#[derive(Clone, Debug)]
pub struct ActionCase {
    pub key: String,
    pub e: CharacteristicDistribution,
    pub momentum: Option<ClassicalMomentumMap>,
    pub quotient_action: QuotientAction,
    pub reductions: Vec<ReductionCase>,
    /// Integration horizon for conservation checks.
    pub horizon: f64,
    pub canonical: bool,
}

impl ActionCase {
    pub fn action(&self) -> &GroupAction {
        self.e.action()
    }

    /// The invariant family folded into one map, tagged with the action.
    pub fn sigma_map(&self) -> SmoothMap {
        sigma_map(
            self.e.sigma(),
            self.e.base().chart().dim(),
            self.action().name(),
        )
    }

    /// Random quadratics in `tanh` of the invariants: invariant Hamiltonians
    /// whose fields grow at most like the invariants' differentials, so
    /// their flows exist for all time.
    pub fn random_hamiltonians(&self, probes: &Probes) -> Vec<SmoothMap> {
        let sigma = self.sigma_map();
        let s = squash(sigma.output_dim()).compose(&sigma);
        let mut rng = probes.rng();
        (0..probes.count)
            .map(|i| {
                random_quadratic(s.output_dim(), &mut rng)
                    .compose(&s)
                    .renamed(format!("h{i}"))
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub summary: String,
    pub cases: Vec<Arc<ActionCase>>,
    pub checks: Vec<Check>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, summary: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            summary: summary.into(),
            cases: Vec::new(),
            checks: Vec::new(),
        }
    }

    /// Register a case together with its generic checks.
    pub fn add_case(&mut self, case: ActionCase) -> Arc<ActionCase> {
        let case = Arc::new(case);
        self.checks.extend(case_checks(&case));
        self.cases.push(case.clone());
        case
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// The named case, or the first one.
    pub fn case(&self, key: Option<&str>) -> Result<&Arc<ActionCase>> {
        match key {
            None => self.cases.first().ok_or_else(|| Error::Unknown {
                kind: "case",
                name: format!("<any> in {}", self.name),
            }),
            Some(k) => self
                .cases
                .iter()
                .find(|c| c.key == k)
                .ok_or_else(|| Error::Unknown {
                    kind: "case",
                    name: k.to_string(),
                }),
        }
    }

    /// The named reduction, or the first one of the chosen case (or of any
    /// case when none is named).
    pub fn reduction(
        &self,
        case: Option<&str>,
        label: Option<&str>,
    ) -> Result<(&Arc<ActionCase>, &ReductionCase)> {
        let cases: Vec<&Arc<ActionCase>> = match case {
            Some(_) => vec![self.case(case)?],
            None => self.cases.iter().collect(),
        };
        for c in cases {
            for r in &c.reductions {
                if label.is_none_or(|l| l == r.name) {
                    return Ok((c, r));
                }
            }
        }
        Err(Error::Unknown {
            kind: "cross-section",
            name: label.unwrap_or("<any>").to_string(),
        })
    }

    pub fn run(&self, ctx: &RunContext, select: Option<&str>) -> Result<Vec<CheckReport>> {
        run_checks(&self.checks, &self.name, ctx, select)
    }
}

pub const NAMES: [&str; 5] = ["torus", "r3", "c3", "z2", "fixtures"];

pub fn by_name(name: &str) -> Result<Scenario> {
    Ok(match name {
        "torus" => torus(),
        "r3" => r3(),
        "c3" => c3(),
        "z2" => z2(),
        "fixtures" => fixtures(),
        _ => {
            return Err(Error::Unknown {
                kind: "scenario",
                name: name.to_string(),
            })
        }
    })
}

pub fn all() -> Vec<Scenario> {
    NAMES
        .iter()
        .map(|n| by_name(n).expect("built-in"))
        .collect()
}

/// `ω = Σ dx_i ∧ dy_i` on `R^{2m}` in the `(x1, y1, x2, y2, …)` ordering.
pub fn standard_form(n: usize) -> Matrix {
    let mut w = Matrix::zeros(n, n);
    for i in (0..n).step_by(2) {
        w[(i, i + 1)] = 1.0;
        w[(i + 1, i)] = -1.0;
    }
    w
}

/// Scalar map with an analytic gradient.
pub fn scalar<F, G>(name: &str, n: usize, f: F, grad: G) -> SmoothMap
where
    F: Fn(&Vector) -> f64 + Send + Sync + 'static,
    G: Fn(&Vector) -> Vector + Send + Sync + 'static,
{
    SmoothMap::scalar(name, n, f).with_gradient(grad)
}

/// `Σ z_i Q_i z_j` style quadratic `½ zᵀ S z` with `S` symmetric.
pub fn quadratic(name: &str, s: Matrix) -> SmoothMap {
    let n = s.nrows();
    let s = (&s + s.transpose()) * 0.5;
    let s2 = s.clone();
    scalar(name, n, move |z| 0.5 * z.dot(&(&s * z)), move |z| &s2 * z)
}

pub fn sigma_map(sigma: &[SmoothMap], n: usize, tag: &str) -> SmoothMap {
    let (a, b) = (sigma.to_vec(), sigma.to_vec());
    let k = sigma.len();
    SmoothMap::vector("sigma", n, k, move |z| {
        Vector::from_iterator(k, a.iter().map(|s| s.value(z)))
    })
    .with_jacobian(move |z| {
        let mut m = Matrix::zeros(k, n);
        for (i, s) in b.iter().enumerate() {
            m.set_row(
                i,
                &s.gradient(z)
                    .expect("invariants are differentiable")
                    .transpose(),
            );
        }
        m
    })
    .tagged(tag)
}

/// Componentwise `tanh` on `R^k`.
fn squash(k: usize) -> SmoothMap {
    SmoothMap::vector("tanh", k, k, |y| y.map(f64::tanh))
        .with_jacobian(|y| Matrix::from_diagonal(&y.map(|v| 1.0 / v.cosh().powi(2))))
}

/// Identity map on `R^n` (also used for zero-dimensional charts).
pub fn identity_map(name: &str, n: usize) -> SmoothMap {
    SmoothMap::vector(name, n, n, |z| z.clone()).with_jacobian(move |_| Matrix::identity(n, n))
}

/// Constant map `R^n -> R^k`.
pub fn constant_map(name: &str, n: usize, value: Vector) -> SmoothMap {
    let k = value.len();
    SmoothMap::vector(name, n, k, move |_| value.clone())
        .with_jacobian(move |_| Matrix::zeros(k, n))
}

pub(crate) fn rank_report(
    name: &str,
    case: &ActionCase,
    points: &[Vector],
    expected: usize,
) -> CheckReport {
    let mut r = CheckReport::new(name, 0.0);
    for z in points {
        let got = case.e.fiber(z).dim();
        if got != expected {
            r.note(format!("rank {got} at a probe"));
        }
        r.record(got.abs_diff(expected) as f64);
    }
    r
}

/// Passes when the action is rejected as not globally Hamiltonian.
pub(crate) fn momentum_absent(name: &str, prov: Provenance, case: &Arc<ActionCase>) -> Check {
    case_check(name.to_string(), prov, 5, case, |c, ctx, p| {
        let mut r = CheckReport::new("", 0.0);
        match classical_momentum(c.action(), c.e.poisson(), None, p, ctx.tolerances.map) {
            Err(Error::NotHamiltonian(why)) => {
                r.note(why);
                r.record(0.0);
            }
            Err(e) => r.fail(e.to_string()),
            Ok(_) => r.fail("a momentum map was accepted"),
        }
        Ok(r)
    })
}

/// Fixed-space duality of a linear action and the span of invariant
/// differentials at the given points (plus random ones).
pub(crate) fn linear_identity_checks(
    suffix: &str,
    action: &GroupAction,
    sigma: &[SmoothMap],
    points: Vec<Vector>,
) -> Vec<Check> {
    let a = action.clone();
    let dual = Check::new(format!("dual_iso.{suffix}"), Provenance::Paper, move |_| {
        let rep = fixed_dual_isomorphism_check(&a)?;
        let mut r = CheckReport::new("", 0.0);
        r.note(format!(
            "dims {} / {}, rank {}, condition {:.3e}",
            rep.fixed_dim, rep.dual_fixed_dim, rep.rank, rep.condition
        ));
        r.record(if rep.is_isomorphism() { 0.0 } else { 1.0 });
        Ok(r)
    });
    let (a, sigma) = (action.clone(), sigma.to_vec());
    let name = format!("span.{suffix}");
    let seed_name = name.clone();
    let span = Check::new(name, Provenance::Paper, move |ctx| {
        let chart = a.chart().clone();
        let mut all = points.clone();
        all.extend(ctx.probes(&seed_name, 20).points(&chart));
        let mut r = CheckReport::new("", ctx.tolerances.angle);
        for z in all {
            let rep = invariant_differential_span_check(&a, &sigma, &chart.point(z)?)?;
            if !rep.dims_agree() {
                r.fail(format!(
                    "dimensions {} and {}",
                    rep.invariant_differentials.dim(),
                    rep.fixed_annihilator.dim()
                ));
            }
            r.record(rep.max_angle);
        }
        Ok(r)
    });
    vec![dual, span]
}

fn case_check<F>(
    name: String,
    prov: Provenance,
    probes: usize,
    case: &Arc<ActionCase>,
    f: F,
) -> Check
where
    F: Fn(&ActionCase, &RunContext, &Probes) -> Result<CheckReport> + Send + Sync + 'static,
{
    let c = case.clone();
    let seed_name = name.clone();
    Check::new(name, prov, move |ctx| {
        f(&c, ctx, &ctx.probes(&seed_name, probes))
    })
}

fn reduction_check<F>(
    name: String,
    prov: Provenance,
    probes: usize,
    case: &Arc<ActionCase>,
    index: usize,
    f: F,
) -> Check
where
    F: Fn(&ActionCase, &ReductionCase, &RunContext, &Probes) -> Result<CheckReport>
        + Send
        + Sync
        + 'static,
{
    case_check(name, prov, probes, case, move |c, ctx, p| {
        f(c, &c.reductions[index], ctx, p)
    })
}

fn case_checks(case: &Arc<ActionCase>) -> Vec<Check> {
    use Provenance::*;
    let k = case.key.clone();
    let sampler = WordSampler::default();
    let mut out = vec![case_check(
        format!("action.axioms.{k}"),
        Trivial,
        50,
        case,
        |c, ctx, p| Ok(check_action_axioms(c.action(), p, ctx.tolerances.inv)),
    )];
    if c_is_lie(case) {
        out.push(case_check(
            format!("action.generators.{k}"),
            Derived,
            20,
            case,
            |c, ctx, p| Ok(check_generators(c.action(), p, ctx.tolerances.fd)),
        ));
    }
    if case.canonical {
        out.push(case_check(
            format!("action.canonical.{k}"),
            Derived,
            50,
            case,
            |c, ctx, p| is_canonical(c.action(), c.e.poisson(), p, ctx.tolerances.inv),
        ));
    }
    out.push(case_check(
        format!("invariance.sigma.{k}"),
        Derived,
        INVARIANCE_SAMPLES,
        case,
        |c, ctx, p| {
            let parts: Vec<CheckReport> =
                c.e.sigma()
                    .iter()
                    .map(|s| validate_invariance(c.action(), s, p, ctx.tolerances.inv))
                    .collect();
            Ok(merge("", ctx.tolerances.inv, &parts))
        },
    ));
    out.push(case_check(
        format!("distribution.involutive.{k}"),
        Paper,
        30,
        case,
        move |c, ctx, p| {
            Ok(check_involutivity(
                c.e.base(),
                p,
                &sampler,
                ctx.tolerances.involutive,
            ))
        },
    ));
    let labelled = case.e.labels().is_ok_and(|l| !l.is_empty());
    if labelled {
        out.push(case_check(
            format!("distribution.poisson.{k}"),
            Paper,
            20,
            case,
            |c, ctx, p| check_poisson_distribution(&c.e, p, ctx.tolerances.fd),
        ));
    }
    out.push(case_check(
        format!("signature.conserved.{k}"),
        Paper,
        50,
        case,
        |c, ctx, p| check_signature_conserved(&c.e, p, ctx.tolerances.inv),
    ));
    out.push(case_check(
        format!("label.flow_invariant.{k}"),
        Paper,
        20,
        case,
        move |c, ctx, p| check_label_flow_invariance(&c.e, p, &sampler, ctx.tolerances.reach),
    ));
    out.push(case_check(
        format!("induced_action.{k}"),
        Paper,
        20,
        case,
        move |c, ctx, p| {
            induced_action_check(&c.e, &c.quotient_action, p, &sampler, ctx.tolerances.reach)
        },
    ));
    out.push(case_check(
        format!("isotropy.along_words.{k}"),
        Paper,
        20,
        case,
        move |c, _, p| {
            let points = p.points(c.e.base().chart());
            Ok(check_isotropy_along_words(&c.e, &points, &sampler, p.seed))
        },
    ));
    if labelled {
        out.push(case_check(
            format!("quotient_bracket.lift.{k}"),
            Paper,
            20,
            case,
            move |c, ctx, p| {
                let n = c.e.labels()?.len();
                let mut rng = p.rng();
                let (f, g) = (random_quadratic(n, &mut rng), random_quadratic(n, &mut rng));
                check_quotient_bracket(&c.e, &f, &g, p, &sampler, ctx.tolerances.reach)
            },
        ));
        out.push(case_check(
            format!("universality.{k}"),
            Paper,
            3,
            case,
            move |c, ctx, p| {
                let labels = c.e.labels()?;
                let kmap = random_quadratic(labels.len(), &mut p.rng())
                    .compose(&labels.component_map(c.e.base().chart().dim()))
                    .renamed("K");
                let search = OrbitSearch {
                    seed: p.seed,
                    tol_reach: ctx.tolerances.reach,
                    ..OrbitSearch::default()
                };
                check_universality(&c.e, &kmap, p, &sampler, &search, ctx.tolerances.reach)
            },
        ));
    }
    out.push(case_check(
        format!("noether.optimal.{k}"),
        Paper,
        20,
        case,
        |c, ctx, p| {
            let mut parts = Vec::new();
            for (i, h) in c.random_hamiltonians(p).iter().enumerate() {
                let at = Probes::new(2, p.seed.wrapping_add(i as u64 + 1));
                parts.push(check_optimal_noether(
                    &c.e,
                    h,
                    c.horizon,
                    &at,
                    ctx.tolerances.noether,
                )?);
            }
            Ok(merge("", ctx.tolerances.noether, &parts))
        },
    ));
    if case.momentum.is_some() {
        out.push(case_check(
            format!("noether.classical.{k}"),
            Paper,
            20,
            case,
            |c, ctx, p| {
                let j = c.momentum.as_ref().expect("checked");
                let mut parts = Vec::new();
                for (i, h) in c.random_hamiltonians(p).iter().enumerate() {
                    let at = Probes::new(2, p.seed.wrapping_add(i as u64 + 1));
                    parts.push(check_noether_classical(
                        j,
                        c.e.poisson(),
                        h,
                        c.horizon,
                        &at,
                        ctx.tolerances.noether,
                    )?);
                }
                Ok(merge("", ctx.tolerances.noether, &parts))
            },
        ));
        if case.action().is_proper() {
            out.push(case_check(
                format!("eq34.free.{k}"),
                Paper,
                50,
                case,
                |c, ctx, p| {
                    let j = c.momentum.as_ref().expect("checked");
                    let chart = c.e.base().chart().clone();
                    let mut r = CheckReport::new("", ctx.tolerances.angle);
                    for z in p.points(&chart) {
                        let cmp = check_eq34(&c.e, j, &chart.point(z)?)?;
                        let (a, b) = cmp.dims();
                        if a != b {
                            r.fail(format!("dimensions {a} and {b}"));
                        }
                        r.record(cmp.max_angle);
                    }
                    Ok(r)
                },
            ));
        }
    }
    for (i, red) in case.reductions.iter().enumerate() {
        out.extend(reduction_checks(case, i, red));
    }
    out
}

fn c_is_lie(case: &ActionCase) -> bool {
    case.action().finite_order().is_none() && case.action().algebra_dim() > 0
}

fn reduction_checks(case: &Arc<ActionCase>, i: usize, red: &ReductionCase) -> Vec<Check> {
    use Provenance::*;
    let r = red.name.clone();
    let sampler = WordSampler::default();
    let mut out = vec![
        reduction_check(
            format!("level_set.model.{r}"),
            Derived,
            50,
            case,
            i,
            |c, red, ctx, p| validate_level_set(&c.e, &red.level, p, ctx.tolerances.reach),
        ),
        reduction_check(
            format!("level_set.closed.{r}"),
            Paper,
            20,
            case,
            i,
            move |c, red, ctx, p| {
                check_level_set_closed(&c.e, &red.level, p, &sampler, ctx.tolerances.reach)
            },
        ),
        reduction_check(
            format!("reduced.dim.{r}"),
            Derived,
            1,
            case,
            i,
            |_, red, _, _| {
                let mut rep = CheckReport::new("", 0.0);
                rep.record(red.chart.dim.abs_diff(red.expected_dim) as f64);
                Ok(rep)
            },
        ),
        reduction_check(
            format!("reduced.label_isotropy.{r}"),
            Paper,
            20,
            case,
            i,
            |c, red, ctx, p| {
                isotropy_of_label(&c.e, &red.level, &red.g_rho, p, ctx.tolerances.reach)
            },
        ),
        reduction_check(
            format!("reduced.closed.{r}"),
            Paper,
            20,
            case,
            i,
            |c, red, ctx, p| {
                check_reduced_closed(&c.e, &red.level, &red.chart, p, ctx.tolerances.closed)
            },
        ),
    ];
    for part in ["defining_relation", "well_defined", "nondegenerate"] {
        out.push(reduction_check(
            format!("reduced.{part}.{r}"),
            Paper,
            100,
            case,
            i,
            move |c, red, ctx, p| {
                let t = &ctx.tolerances;
                let rep = reduced_form(
                    &c.e,
                    &red.level,
                    &red.chart,
                    &red.g_rho,
                    p,
                    t.reduced_form,
                    t.nondeg,
                )?;
                Ok(match part {
                    "defining_relation" => rep.defining_residual,
                    "well_defined" => rep.well_defined,
                    _ => rep.nondegenerate,
                })
            },
        ));
    }
    for (j, h) in red.hamiltonians.iter().enumerate() {
        let hn = h.name().to_string();
        out.push(reduction_check(
            format!("reduced.flow_commutes.{r}.{hn}"),
            Paper,
            20,
            case,
            i,
            move |c, red, ctx, p| {
                reduce_dynamics(
                    &c.e,
                    &red.level,
                    &red.chart,
                    &red.hamiltonians[j],
                    1.0,
                    p,
                    ctx.tolerances.commute,
                )
            },
        ));
        out.push(reduction_check(
            format!("reduced.energy.{r}.{hn}"),
            Paper,
            10,
            case,
            i,
            move |c, red, ctx, p| {
                check_reduced_energy(
                    &c.e,
                    &red.level,
                    &red.chart,
                    &red.hamiltonians[j],
                    1.0,
                    p,
                    ctx.tolerances.energy,
                )
            },
        ));
    }
    if red.hamiltonians.len() >= 2 {
        out.push(reduction_check(
            format!("reduced.bracket.{r}"),
            Paper,
            50,
            case,
            i,
            |c, red, ctx, p| {
                let (h, k) = (&red.hamiltonians[0], &red.hamiltonians[1]);
                reduced_bracket_check(
                    &c.e,
                    &red.level,
                    &red.chart,
                    h,
                    k,
                    p,
                    ctx.tolerances.reduced_form,
                )
            },
        ));
    }
    if red.mw.is_some() && case.momentum.is_some() {
        for part in ["form", "level", "dim"] {
            out.push(reduction_check(
                format!("mw.{part}.{r}"),
                Paper,
                50,
                case,
                i,
                move |c, red, ctx, p| {
                    let j = c.momentum.as_ref().expect("checked");
                    let mw = red.mw.as_ref().expect("checked");
                    let cmp = mw_reduce_compare(
                        &c.e,
                        j,
                        &red.level,
                        &red.chart,
                        mw,
                        p,
                        ctx.tolerances.reduced_form,
                    )?;
                    Ok(match part {
                        "form" => cmp.form,
                        "level" => cmp.level,
                        _ => {
                            let mut rep = CheckReport::new("", 0.0);
                            rep.note(format!("optimal {} / MW {}", cmp.optimal_dim, cmp.mw_dim));
                            rep.record(cmp.optimal_dim.abs_diff(cmp.mw_dim) as f64);
                            rep
                        }
                    })
                },
            ));
        }
    }
    out
}
