//! The two-torus with `ω = dθ1∧dθ2` and the circle shifting `θ1`.
//!
//! `E` is spanned by `∂θ1` everywhere, the optimal momentum map is `θ2`,
//! and the shift admits no momentum map since `ι_{∂θ1}ω = dθ2` is not exact.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::checks::{Check, Provenance};
use crate::distribution::ConservedQuantity;
use crate::group_action::{is_canonical, isotropy_at, validate_invariance, GroupAction};
use crate::linalg::{Matrix, Subspace, Vector};
use crate::optimal_momentum::{
    build_characteristic, check_optimal_noether, quotient_bracket, random_quadratic, LabelSpec,
    OptimalLabel, QuotientAction, Signature,
};
use crate::phase_space::{Chart, PoissonStructure, Probes, SmoothMap};
use crate::reduction::{LevelSetModel, ReducedChart};
use crate::report::CheckReport;

use super::{
    constant_map, momentum_absent, rank_report, scalar, standard_form, ActionCase, ReductionCase,
    Scenario, INVARIANCE_SAMPLES,
};

pub const ACTION: &str = "S1";

fn chart() -> Arc<Chart> {
    Arc::new(Chart::with_periods(
        "T2",
        vec![Some(2.0 * PI), Some(2.0 * PI)],
    ))
}

pub fn torus() -> Scenario {
    let chart = chart();
    let poisson =
        PoissonStructure::constant_symplectic(chart.clone(), standard_form(2)).expect("ω");
    let shift = GroupAction::translation(
        ACTION,
        chart.clone(),
        Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
        vec![Some(2.0 * PI)],
    )
    .expect("shift");
    let sigma = vec![
        scalar(
            "sin_theta2",
            2,
            |z| z[1].sin(),
            |z| Vector::from_vec(vec![0.0, z[1].cos()]),
        )
        .tagged(ACTION),
        scalar(
            "cos_theta2",
            2,
            |z| z[1].cos(),
            |z| Vector::from_vec(vec![0.0, -z[1].sin()]),
        )
        .tagged(ACTION),
    ];
    let theta2 = ConservedQuantity::periodic(
        scalar("theta2", 2, |z| z[1], |_| Vector::from_vec(vec![0.0, 1.0])),
        2.0 * PI,
    );
    let e = build_characteristic(&shift, &poisson, sigma, &Probes::new(INVARIANCE_SAMPLES, 0))
        .expect("invariant family")
        .with_labels(LabelSpec::components(vec![theta2]));

    let free_class = isotropy_at(&shift, &Vector::from_vec(vec![0.3, 1.0])).class_id;
    let level = LevelSetModel::new(
        OptimalLabel {
            signature: Signature::Values(vec![1.0]),
            isotropy_class: free_class,
        },
        SmoothMap::vector("theta2_circle", 1, 2, |s| Vector::from_vec(vec![s[0], 1.0]))
            .with_jacobian(|_| Matrix::from_column_slice(2, 1, &[1.0, 0.0])),
        Arc::new(|rng| Vector::from_element(1, rand::Rng::random_range(rng, 0.0..2.0 * PI))),
    );
    let reduced = ReducedChart::new(
        constant_map("to_point", 2, Vector::zeros(0)),
        constant_map("lift", 0, Vector::from_vec(vec![0.0, 1.0])),
    )
    .expect("chart");

    let mut s = Scenario::new("torus", "T² with the θ1 shift: E = span ∂θ1, labels θ2");
    let case = s.add_case(ActionCase {
        key: "shift".into(),
        e,
        momentum: None,
        quotient_action: QuotientAction::Trivial,
        reductions: vec![ReductionCase {
            name: "theta2_1".into(),
            level,
            chart: reduced,
            g_rho: shift.clone(),
            mw: None,
            hamiltonians: Vec::new(),
            expected_dim: 0,
        }],
        horizon: 10.0,
        canonical: true,
    });

    use Provenance::*;
    let c = case.clone();
    s.push(Check::new("rank.shift", Paper, move |ctx| {
        let points = ctx.probes("rank.shift", 50).points(c.e.base().chart());
        let mut r = rank_report("", &c, &points, 1);
        let line = Subspace::from_vectors(2, &[Vector::from_vec(vec![1.0, 0.0])]);
        for z in &points {
            r.record(c.e.fiber(z).max_angle(&line));
        }
        Ok(r)
    }));
    s.push(momentum_absent("momentum.absent.shift", Paper, &case));
    let c = case.clone();
    s.push(Check::new(
        "quotient_bracket.zero.shift",
        Paper,
        move |ctx| {
            let p = ctx.probes("quotient_bracket.zero.shift", 50);
            let mut rng = p.rng();
            let chart = c.e.base().chart().clone();
            let mut r = CheckReport::new("", ctx.tolerances.noether);
            for z in p.points(&chart) {
                let (f, g) = (random_quadratic(1, &mut rng), random_quadratic(1, &mut rng));
                r.record(quotient_bracket(&c.e, &f, &g, &chart.point(z)?)?.abs());
            }
            Ok(r)
        },
    ));
    let control_chart = chart.clone();
    let control_poisson = poisson.clone();
    s.push(Check::control(
        "control.canonical.dilation",
        Derived,
        0.0,
        move |ctx| {
            let dilation = GroupAction::matrix_lie(
                "dilation",
                control_chart.clone(),
                vec![Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])],
            )?;
            is_canonical(
                &dilation,
                &control_poisson,
                &ctx.probes("control.canonical.dilation", 20),
                ctx.tolerances.inv,
            )
        },
    ));
    let mistagged = scalar(
        "sin_theta1",
        2,
        |z| z[0].sin(),
        |z| Vector::from_vec(vec![z[0].cos(), 0.0]),
    )
    .tagged(ACTION);
    let (c, h) = (case.clone(), mistagged.clone());
    s.push(Check::control(
        "control.noether.mistagged",
        Derived,
        0.0,
        move |ctx| {
            check_optimal_noether(
                &c.e,
                &h,
                1.0,
                &ctx.probes("control.noether.mistagged", 10),
                ctx.tolerances.noether,
            )
        },
    ));
    let c = case;
    s.push(Check::control(
        "control.invariance.mistagged",
        Derived,
        0.0,
        move |ctx| {
            Ok(validate_invariance(
                c.action(),
                &mistagged,
                &ctx.probes("control.invariance.mistagged", 50),
                ctx.tolerances.inv,
            ))
        },
    ));
    s
}
