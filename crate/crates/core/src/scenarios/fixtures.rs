//! Small linear fixtures for the representation-theoretic identities and
//! for reduction by the trivial group.
//!
//! - `reflection`: `Z2` acting on `R²` by `(x, y) ↦ (x, -y)`, invariants `x, y²`.
//!   Not canonical, so only the linear identities are checked.
//! - `s1_weight`: the circle rotating `z1` in `C²` and fixing `z2`, invariants
//!   `|z1|², x2, y2`.
//! - `trivial`: the one-element group on `R²`, where `E` is everything and
//!   optimal, MW and identity reductions coincide.

use std::sync::Arc;

use crate::distribution::ConservedQuantity;
use crate::group_action::{classical_momentum, linear_momentum_components, GroupAction};
use crate::linalg::{Matrix, Vector};
use crate::optimal_momentum::{build_characteristic, label_at, LabelSpec, QuotientAction};
use crate::phase_space::{Chart, PoissonStructure, Probes, SmoothMap};
use crate::reduction::{LevelSetModel, MwSetup, ReducedChart};
use crate::tolerances::TOL_MAP;

use super::{
    identity_map, linear_identity_checks, quadratic, scalar, standard_form, ActionCase,
    ReductionCase, Scenario, INVARIANCE_SAMPLES,
};

fn coordinate(name: &str, n: usize, i: usize) -> SmoothMap {
    scalar(
        name,
        n,
        move |z| z[i],
        move |_| {
            let mut g = Vector::zeros(n);
            g[i] = 1.0;
            g
        },
    )
}

fn reflection() -> (GroupAction, Vec<SmoothMap>) {
    let chart = Arc::new(Chart::euclidean("R2", 2));
    let a = GroupAction::finite(
        "Z2r",
        chart,
        vec![
            Matrix::identity(2, 2),
            Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        ],
    )
    .expect("reflection");
    let mut s = Matrix::zeros(2, 2);
    s[(1, 1)] = 2.0;
    let sigma = vec![
        coordinate("x", 2, 0).tagged("Z2r"),
        quadratic("yy", s).tagged("Z2r"),
    ];
    (a, sigma)
}

fn s1_weight_case() -> ActionCase {
    let chart = Arc::new(Chart::euclidean("R4", 4));
    let poisson =
        PoissonStructure::constant_symplectic(chart.clone(), standard_form(4)).expect("ω");
    let a = GroupAction::torus("S1w", chart, vec![(0, 1), (2, 3)], vec![vec![1], vec![0]])
        .expect("circle");
    let mut s = Matrix::zeros(4, 4);
    s[(0, 0)] = 2.0;
    s[(1, 1)] = 2.0;
    let norm_z1 = quadratic("norm_z1", s);
    let sigma = vec![
        norm_z1.clone().tagged("S1w"),
        coordinate("x2", 4, 2).tagged("S1w"),
        coordinate("y2", 4, 3).tagged("S1w"),
    ];
    let e = build_characteristic(&a, &poisson, sigma, &Probes::new(INVARIANCE_SAMPLES, 0))
        .expect("invariant family")
        .with_labels(LabelSpec::components(vec![ConservedQuantity::new(norm_z1)]));
    let j = classical_momentum(
        &a,
        &poisson,
        Some(linear_momentum_components(&a, &poisson).expect("linear")),
        &Probes::new(20, 0),
        TOL_MAP,
    )
    .expect("momentum map");
    ActionCase {
        key: "s1_weight".into(),
        e,
        momentum: Some(j),
        quotient_action: QuotientAction::Trivial,
        reductions: Vec::new(),
        horizon: 1.0,
        canonical: true,
    }
}

fn trivial_case() -> ActionCase {
    let chart = Arc::new(Chart::euclidean("R2t", 2));
    let poisson =
        PoissonStructure::constant_symplectic(chart.clone(), standard_form(2)).expect("ω");
    let a = GroupAction::finite("E", chart, vec![Matrix::identity(2, 2)]).expect("trivial group");
    let sigma = vec![
        coordinate("x", 2, 0).tagged("E"),
        coordinate("y", 2, 1).tagged("E"),
    ];
    let e = build_characteristic(&a, &poisson, sigma, &Probes::new(INVARIANCE_SAMPLES, 0))
        .expect("invariant family")
        .with_labels(LabelSpec::components(Vec::new()));
    let j = classical_momentum(&a, &poisson, None, &Probes::new(5, 0), TOL_MAP).expect("zero map");
    let level = LevelSetModel::new(
        label_at(&e, &Vector::zeros(2)).expect("label"),
        identity_map("plane", 2),
        Arc::new(|rng| {
            let x = rand::Rng::random_range(rng, -1.0..1.0);
            Vector::from_vec(vec![x, rand::Rng::random_range(rng, -1.0..1.0)])
        }),
    );
    let chart = ReducedChart::new(identity_map("id", 2), identity_map("id", 2)).expect("chart");
    let mut xy = Matrix::zeros(2, 2);
    xy[(0, 1)] = 1.0;
    let hamiltonians = vec![
        quadratic("xy", xy).tagged("E"),
        quadratic("half_norm2", Matrix::identity(2, 2)).tagged("E"),
    ];
    ActionCase {
        key: "trivial".into(),
        reductions: vec![ReductionCase {
            name: "identity".into(),
            level,
            chart: chart.clone(),
            g_rho: a,
            mw: Some(MwSetup {
                mu: Vector::zeros(0),
                chart,
                to_optimal: identity_map("id", 2),
            }),
            hamiltonians,
            expected_dim: 2,
        }],
        e,
        momentum: Some(j),
        quotient_action: QuotientAction::Trivial,
        horizon: 1.0,
        canonical: true,
    }
}

pub fn fixtures() -> Scenario {
    let mut s = Scenario::new(
        "fixtures",
        "Linear fixtures: Z2 reflection, weighted circle, trivial group",
    );
    let (refl, refl_sigma) = reflection();
    for c in linear_identity_checks(
        "reflection",
        &refl,
        &refl_sigma,
        vec![
            Vector::from_vec(vec![0.7, 0.0]),
            Vector::from_vec(vec![0.7, 0.3]),
        ],
    ) {
        s.push(c);
    }
    let weighted = s.add_case(s1_weight_case());
    for c in linear_identity_checks(
        "s1_weight",
        weighted.action(),
        weighted.e.sigma(),
        vec![
            Vector::from_vec(vec![0.0, 0.0, 0.4, -0.2]),
            Vector::from_vec(vec![0.5, 0.1, 0.4, -0.2]),
        ],
    ) {
        s.push(c);
    }
    s.add_case(trivial_case());
    s
}
