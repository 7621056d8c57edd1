//! `R²` with `ω = dx∧dy` and `Z2` acting by `-I`.
//!
//! The classical momentum map is zero, while `E` has rank 2 off the origin
//! and rank 0 at it: the optimal labels separate the fixed point from the
//! rest, and the origin reduces to a point.

use std::sync::Arc;

use crate::checks::{Check, Provenance};
use crate::distribution::{apply_flow_word_recorded, WordSampler};
use crate::group_action::{
    bsharp_equivariance_check, bsharp_fixed_angle, classical_momentum, GroupAction,
};
use crate::linalg::{Matrix, Subspace, Vector};
use crate::ode::StepControl;
use crate::optimal_momentum::{build_characteristic, label_at, LabelSpec, QuotientAction};
use crate::phase_space::{Chart, PoissonStructure, Probes};
use crate::reduction::{LevelSetModel, MwSetup, ReducedChart};
use crate::report::CheckReport;
use crate::tolerances::TOL_MAP;

use super::{
    constant_map, identity_map, linear_identity_checks, quadratic, rank_report, standard_form,
    ActionCase, ReductionCase, Scenario, INVARIANCE_SAMPLES,
};

pub const ACTION: &str = "Z2";

fn monomial(name: &str, i: usize, j: usize) -> crate::phase_space::SmoothMap {
    let mut s = Matrix::zeros(2, 2);
    s[(i, j)] += 1.0;
    s[(j, i)] += 1.0;
    quadratic(name, s)
}

pub fn z2() -> Scenario {
    let chart = Arc::new(Chart::euclidean("R2", 2));
    let poisson =
        PoissonStructure::constant_symplectic(chart.clone(), standard_form(2)).expect("ω");
    let minus = GroupAction::finite(
        ACTION,
        chart.clone(),
        vec![Matrix::identity(2, 2), -Matrix::identity(2, 2)],
    )
    .expect("Z2");
    let sigma = vec![
        monomial("xx", 0, 0).tagged(ACTION),
        monomial("xy", 0, 1).tagged(ACTION),
        monomial("yy", 1, 1).tagged(ACTION),
    ];
    let e = build_characteristic(&minus, &poisson, sigma, &Probes::new(INVARIANCE_SAMPLES, 0))
        .expect("invariant family")
        .with_labels(LabelSpec::components(Vec::new()));
    let j =
        classical_momentum(&minus, &poisson, None, &Probes::new(5, 0), TOL_MAP).expect("zero map");
    let origin = Vector::zeros(2);
    let level = LevelSetModel::new(
        label_at(&e, &origin).expect("label"),
        constant_map("origin", 0, origin.clone()),
        Arc::new(|_| Vector::zeros(0)),
    );
    let reduced = ReducedChart::new(
        constant_map("to_point", 2, Vector::zeros(0)),
        constant_map("lift", 0, origin.clone()),
    )
    .expect("chart");
    let mw = MwSetup {
        mu: Vector::zeros(0),
        chart: reduced.clone(),
        to_optimal: identity_map("id_point", 0),
    };

    let mut s = Scenario::new(
        "z2",
        "R² under -I: zero momentum map, rank-2 E off the origin",
    );
    let case = s.add_case(ActionCase {
        key: "minus_identity".into(),
        e,
        momentum: Some(j),
        quotient_action: QuotientAction::Trivial,
        reductions: vec![ReductionCase {
            name: "origin".into(),
            level,
            chart: reduced,
            g_rho: minus.clone(),
            mw: Some(mw),
            hamiltonians: Vec::new(),
            expected_dim: 0,
        }],
        horizon: 1.0,
        canonical: true,
    });

    use Provenance::*;
    let c = case.clone();
    s.push(Check::new(
        "momentum.zero.minus_identity",
        Paper,
        move |ctx| {
            let j = classical_momentum(
                c.action(),
                c.e.poisson(),
                None,
                &ctx.probes("momentum.zero", 5),
                ctx.tolerances.map,
            )?;
            let mut r = CheckReport::new("", 0.0);
            r.record(j.dim() as f64);
            Ok(r)
        },
    ));
    let c = case.clone();
    s.push(Check::new(
        "rank.generic.minus_identity",
        Derived,
        move |ctx| {
            let points = ctx
                .probes("rank.generic.minus_identity", 50)
                .points(c.e.base().chart());
            Ok(rank_report("", &c, &points, 2))
        },
    ));
    let c = case.clone();
    s.push(Check::new(
        "rank.origin.minus_identity",
        Derived,
        move |_| Ok(rank_report("", &c, &[Vector::zeros(2)], 0)),
    ));
    let c = case.clone();
    s.push(Check::new(
        "isotropy.origin_fixed.minus_identity",
        Derived,
        move |ctx| {
            let p = ctx.probes("isotropy.origin_fixed", 20);
            let mut rng = p.rng();
            let mut r = CheckReport::new("", 0.0);
            for _ in 0..p.count {
                let w = WordSampler::default().sample(c.e.base(), &mut rng);
                let (end, _) = apply_flow_word_recorded(
                    c.e.base(),
                    &w,
                    &Vector::zeros(2),
                    &StepControl::default(),
                )?;
                r.record(end.amax());
            }
            Ok(r)
        },
    ));
    for check in linear_identity_checks(
        "minus_identity",
        case.action(),
        case.e.sigma(),
        vec![Vector::zeros(2), Vector::from_vec(vec![0.3, -0.8])],
    ) {
        s.push(check);
    }
    let c = case;
    s.push(Check::new(
        "isotropy.bsharp.minus_identity",
        Derived,
        move |ctx| {
            let z = Vector::zeros(2);
            let mut r =
                bsharp_equivariance_check(c.action(), c.e.poisson(), &z, ctx.tolerances.angle);
            r.record(bsharp_fixed_angle(
                c.action(),
                c.e.poisson(),
                &z,
                &Subspace::full(2),
            ));
            Ok(r)
        },
    ));
    s
}
