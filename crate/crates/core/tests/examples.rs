//! Worked examples for the individual operations, each against a closed
//! form computed here by hand.

use std::sync::Arc;

use approx::assert_abs_diff_eq;

use optmom::distribution::{OrbitSearch, WordSampler};
use optmom::group_action::{
    check_noether_classical, fixed_dual_isomorphism_check, invariant_differential_span_check,
    isotropy_at, GroupAction,
};
use optmom::linalg::{Matrix, Subspace, Vector};
use optmom::ode::StepControl;
use optmom::optimal_momentum::{
    check_eq34, check_optimal_noether, check_universality, label_at, quotient_bracket,
    random_quadratic, Signature,
};
use optmom::phase_space::{
    bracket_at, flow, hamiltonian_vector_field, is_poisson_map, Chart, Probes, SmoothMap,
};
use optmom::reduction::{reduce_dynamics, reduced_bracket_check};
use optmom::scenarios::{self, quadratic, scalar, ActionCase};

fn coord(name: &str, n: usize, i: usize) -> SmoothMap {
    scalar(
        name,
        n,
        move |z| z[i],
        move |_| Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 }),
    )
}

fn case(s: &scenarios::Scenario, key: &str) -> Arc<ActionCase> {
    s.case(Some(key)).unwrap().clone()
}

fn v(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}

#[test]
fn r3_bracket_of_coordinates_is_b12() {
    let s = scenarios::r3();
    let p = case(&s, "translation").e.poisson().clone();
    for z in Probes::new(10, 3).points(p.chart()) {
        assert_eq!(
            bracket_at(&p, &coord("x", 3, 0), &coord("y", 3, 1), &z).unwrap(),
            1.0
        );
        assert_eq!(
            bracket_at(&p, &coord("y", 3, 1), &coord("z", 3, 2), &z).unwrap(),
            1.0
        );
        assert_eq!(
            bracket_at(&p, &coord("x", 3, 0), &coord("z", 3, 2), &z).unwrap(),
            0.0
        );
    }
}

#[test]
fn r3_hamiltonian_fields_follow_the_tensor() {
    let s = scenarios::r3();
    let p = case(&s, "translation").e.poisson().clone();
    let m = Matrix::from_row_slice(3, 3, &[1.0, 2.0, -1.0, 2.0, 0.5, 3.0, -1.0, 3.0, -2.0]);
    let f = quadratic("f", m.clone());
    let x_f = hamiltonian_vector_field(&p, &f).unwrap();
    for z in Probes::new(20, 4).points(p.chart()) {
        let d = &m * &z;
        let expected = v(&[d[1], d[2] - d[0], -d[1]]);
        assert!((x_f.eval(&z) - expected).amax() < 1e-12);
    }
}

#[test]
fn r3_flow_of_y_is_a_constant_translation() {
    let s = scenarios::r3();
    let c = case(&s, "translation");
    let p = c.e.poisson();
    let origin = p.chart().point(Vector::zeros(3)).unwrap();
    let end = flow(p, &coord("y", 3, 1), &origin, 1.0, &StepControl::default()).unwrap();
    assert!((end.coords() - v(&[1.0, 0.0, -1.0])).amax() < 1e-12);
    // The two characteristic fields: B e_y and B e_z.
    let d = c.e.base();
    let z = v(&[0.3, -0.2, 1.1]);
    assert!((d.family()[0].field.eval(&z) - v(&[1.0, 0.0, -1.0])).amax() < 1e-12);
    assert!((d.family()[1].field.eval(&z) - v(&[0.0, 1.0, 0.0])).amax() < 1e-12);
}

#[test]
fn r3_invariant_flows_are_poisson_maps() {
    let s = scenarios::r3();
    let p = case(&s, "translation").e.poisson().clone();
    let mut yz = Matrix::zeros(3, 3);
    yz[(1, 2)] = 1.0;
    let h = quadratic("yz", yz);
    let (p1, h1) = (p.clone(), h.clone());
    let phi = SmoothMap::vector("F_0.7", 3, 3, move |z| {
        let z0 = p1.chart().point(z.clone()).unwrap();
        flow(&p1, &h1, &z0, 0.7, &StepControl::default())
            .unwrap()
            .coords()
            .clone()
    });
    let r = is_poisson_map(&phi, &p, &p, &Probes::new(10, 5), 1e-5).unwrap();
    assert!(r.passed, "{}", r.text_line());
}

#[test]
fn c3_rotation_field_and_half_period() {
    let s = scenarios::c3();
    let p = case(&s, "s1").e.poisson().clone();
    let h = quadratic("half_norm2", Matrix::identity(6, 6));
    let x_h = hamiltonian_vector_field(&p, &h).unwrap();
    for z in Probes::new(10, 6).points(p.chart()) {
        // d/dt z e^{-it} at t = 0 is -i z, i.e. (x, y) -> (y, -x) per factor.
        let expected = Vector::from_fn(6, |k, _| if k % 2 == 0 { z[k + 1] } else { -z[k - 1] });
        assert!((x_h.eval(&z) - expected).amax() < 1e-12);
        let start = p.chart().point(z.clone()).unwrap();
        let end = flow(
            &p,
            &h,
            &start,
            std::f64::consts::PI,
            &StepControl::default(),
        )
        .unwrap();
        assert!((end.coords() + &z).amax() < 1e-8);
    }
}

#[test]
fn c3_mixing_bracket_closed_form() {
    let s = scenarios::c3();
    let c = case(&s, "s1");
    let [re, im] = scenarios::mixing_hamiltonians();
    for z in Probes::new(20, 8).points(c.e.poisson().chart()) {
        // {Re z1 z̄2, Im z1 z̄2} = |z2|² - |z1|².
        let expected = z[2] * z[2] + z[3] * z[3] - z[0] * z[0] - z[1] * z[1];
        assert_abs_diff_eq!(
            bracket_at(c.e.poisson(), &re, &im, &z).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }
    let red = &c.reductions[0];
    let same = reduced_bracket_check(
        &c.e,
        &red.level,
        &red.chart,
        &re,
        &re,
        &Probes::new(10, 1),
        1e-6,
    )
    .unwrap();
    assert!(
        same.passed && same.max_residual < 1e-12,
        "{}",
        same.text_line()
    );
}

#[test]
fn c3_reduced_dynamics_of_the_norm_is_stationary() {
    let s = scenarios::c3();
    let c = case(&s, "s1");
    let red = &c.reductions[0];
    let h = quadratic("half_norm2", Matrix::identity(6, 6)).tagged(scenarios::C3_S1);
    let r = reduce_dynamics(
        &c.e,
        &red.level,
        &red.chart,
        &h,
        1.0,
        &Probes::new(10, 2),
        1e-5,
    )
    .unwrap();
    assert!(r.passed, "{}", r.text_line());
    let [re, _] = scenarios::mixing_hamiltonians();
    let r = reduce_dynamics(
        &c.e,
        &red.level,
        &red.chart,
        &re,
        0.0,
        &Probes::new(10, 2),
        1e-5,
    )
    .unwrap();
    assert_eq!(r.max_residual, 0.0);
}

#[test]
fn c3_classical_noether() {
    let s = scenarios::c3();
    let c = case(&s, "s1");
    let j = c.momentum.as_ref().unwrap();
    let p = c.e.poisson();
    let probes = Probes::new(5, 9);
    let h = quadratic("half_norm2", Matrix::identity(6, 6)).tagged(scenarios::C3_S1);
    assert!(
        check_noether_classical(j, p, &h, 1.0, &probes, 1e-8)
            .unwrap()
            .passed
    );
    let constant = SmoothMap::scalar("one", 6, |_| 1.0).tagged(scenarios::C3_S1);
    let r = check_noether_classical(j, p, &constant, 1.0, &probes, 1e-8).unwrap();
    assert_eq!(r.max_residual, 0.0);
    // Re z1 is not invariant; the tag is a lie and the drift shows it.
    let re_z1 = coord("re_z1", 6, 0).tagged(scenarios::C3_S1);
    let r = check_noether_classical(j, p, &re_z1, 1.0, &probes, 1e-8).unwrap();
    assert!(!r.passed);
    // J = ½|z|² generates the circle: X_J equals the infinitesimal action.
    let x_j = hamiltonian_vector_field(p, &j.components()[0]).unwrap();
    for z in probes.points(p.chart()) {
        let gen = c.action().generators_at(&z).column(0).into_owned();
        assert!((x_j.eval(&z) - gen).amax() < 1e-6);
    }
}

#[test]
fn c3_labels_cone_point_and_quotient_bracket() {
    let s = scenarios::c3();
    let su3 = case(&s, "su3");
    assert_eq!(
        label_at(&su3.e, &Vector::zeros(6)).unwrap().signature,
        Signature::Apex
    );
    let mut rng = Probes::new(1, 3).rng();
    let k = su3.e.labels().unwrap().len();
    let (f, g) = (random_quadratic(k, &mut rng), random_quadratic(k, &mut rng));
    let origin = su3.e.base().chart().point(Vector::zeros(6)).unwrap();
    assert_eq!(quotient_bracket(&su3.e, &f, &g, &origin).unwrap(), 0.0);
}

#[test]
fn c3_eq34_dimensions() {
    let s = scenarios::c3();
    let c = case(&s, "s1");
    let j = c.momentum.as_ref().unwrap();
    let chart = c.e.base().chart();
    let z = chart.point(v(&[0.3, -0.1, 0.5, 0.2, -0.4, 0.7])).unwrap();
    let cmp = check_eq34(&c.e, j, &z).unwrap();
    assert_eq!(cmp.dims(), (5, 5));
    assert!(cmp.max_angle < 1e-6);
    let cmp = check_eq34(&c.e, j, &chart.point(Vector::zeros(6)).unwrap()).unwrap();
    assert_eq!(cmp.dims(), (0, 0));
}

#[test]
fn c3_invariant_differentials_span_the_fixed_annihilator() {
    let s = scenarios::c3();
    let c = case(&s, "s1");
    let chart = c.e.base().chart();
    let z = chart.point(v(&[0.3, -0.1, 0.5, 0.2, -0.4, 0.7])).unwrap();
    let r = invariant_differential_span_check(c.action(), c.e.sigma(), &z).unwrap();
    assert_eq!(r.invariant_differentials.dim(), 5);
    assert!(r.dims_agree() && r.max_angle < 1e-6);
    let r = invariant_differential_span_check(
        c.action(),
        c.e.sigma(),
        &chart.point(Vector::zeros(6)).unwrap(),
    )
    .unwrap();
    assert!(r.dims_agree());
}

#[test]
fn universality_of_the_classical_and_trivial_candidates() {
    let search = OrbitSearch::default();
    let s = scenarios::c3();
    let c = case(&s, "s1");
    let j = c.momentum.as_ref().unwrap().components()[0].clone();
    let probes = Probes::new(3, 11);
    let r = check_universality(&c.e, &j, &probes, &WordSampler::default(), &search, 1e-6).unwrap();
    assert!(r.passed, "{}", r.text_line());
    let constant = SmoothMap::scalar("zero", 6, |_| 0.0);
    let r = check_universality(
        &c.e,
        &constant,
        &probes,
        &WordSampler::default(),
        &search,
        1e-6,
    )
    .unwrap();
    assert_eq!(r.max_residual, 0.0);
    let t = scenarios::torus();
    let shift = case(&t, "shift");
    let theta2 = SmoothMap::scalar("theta2", 2, |z| z[1].sin());
    let r = check_universality(
        &shift.e,
        &theta2,
        &probes,
        &WordSampler::default(),
        &search,
        1e-6,
    )
    .unwrap();
    assert!(r.passed, "{}", r.text_line());
}

#[test]
fn labels_of_the_flat_examples() {
    let t = scenarios::torus();
    let shift = case(&t, "shift");
    assert_eq!(
        label_at(&shift.e, &v(&[0.4, 1.3])).unwrap().signature,
        Signature::Values(vec![1.3])
    );
    let r = scenarios::r3();
    let tr = case(&r, "translation");
    let Signature::Values(x) = label_at(&tr.e, &v(&[0.5, 2.0, -0.25])).unwrap().signature else {
        panic!("r3 labels are values");
    };
    assert_abs_diff_eq!(x[0], 0.25, epsilon = 1e-15);
}

#[test]
fn optimal_noether_on_r3() {
    let s = scenarios::r3();
    let c = case(&s, "translation");
    let mut yz = Matrix::zeros(3, 3);
    yz[(1, 2)] = 1.0;
    let h = quadratic("yz", yz).tagged(c.action().name());
    let probes = Probes::new(5, 12);
    assert!(
        check_optimal_noether(&c.e, &h, 1.0, &probes, 1e-8)
            .unwrap()
            .passed
    );
    let one = SmoothMap::scalar("one", 3, |_| 1.0).tagged(c.action().name());
    assert_eq!(
        check_optimal_noether(&c.e, &one, 1.0, &probes, 1e-8)
            .unwrap()
            .max_residual,
        0.0
    );
}

#[test]
fn fixed_dual_spaces_of_small_groups() {
    let r2 = Arc::new(Chart::euclidean("R2", 2));
    let trivial = GroupAction::finite("E", r2.clone(), vec![Matrix::identity(2, 2)]).unwrap();
    let rep = fixed_dual_isomorphism_check(&trivial).unwrap();
    assert!(rep.is_isomorphism() && rep.fixed_dim == 2);

    let flip = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let refl = GroupAction::finite("Z2r", r2, vec![Matrix::identity(2, 2), flip]).unwrap();
    let rep = fixed_dual_isomorphism_check(&refl).unwrap();
    assert!(rep.is_isomorphism());
    assert_eq!((rep.fixed_dim, rep.dual_fixed_dim), (1, 1));
    assert!(
        rep.dual_fixed
            .max_angle(&Subspace::from_vectors(2, &[v(&[1.0, 0.0])]))
            < 1e-12
    );

    let r4 = Arc::new(Chart::euclidean("R4", 4));
    let circle =
        GroupAction::torus("S1w", r4, vec![(0, 1), (2, 3)], vec![vec![1], vec![0]]).unwrap();
    let rep = fixed_dual_isomorphism_check(&circle).unwrap();
    assert!(rep.is_isomorphism());
    assert_eq!(rep.fixed_dim, 2);
}

#[test]
fn z2_stabilizers_and_fixed_point_span() {
    let z2 = scenarios::z2();
    let c = case(&z2, "minus_identity");
    assert_eq!(
        isotropy_at(c.action(), &v(&[0.3, 0.1]))
            .finite_stabilizer
            .len(),
        1
    );
    assert_eq!(
        isotropy_at(c.action(), &Vector::zeros(2))
            .finite_stabilizer
            .len(),
        2
    );
    let j = c.momentum.as_ref().unwrap();
    let origin = c.e.base().chart().point(Vector::zeros(2)).unwrap();
    let cmp = check_eq34(&c.e, j, &origin).unwrap();
    assert_eq!(cmp.dims(), (0, 0));

    let r2 = Arc::new(Chart::euclidean("R2", 2));
    let flip = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let refl = GroupAction::finite("Z2r", r2.clone(), vec![Matrix::identity(2, 2), flip]).unwrap();
    let sigma = vec![
        coord("x", 2, 0),
        SmoothMap::scalar("yy", 2, |z| z[1] * z[1]),
    ];
    let fixed = r2.point(v(&[0.7, 0.0])).unwrap();
    let r = invariant_differential_span_check(&refl, &sigma, &fixed).unwrap();
    assert_eq!(r.invariant_differentials.dim(), 1);
    assert!(r.dims_agree() && r.max_angle < 1e-6);
}
