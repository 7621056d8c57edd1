use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use optmom::checks::RunContext;
use optmom::distribution::{
    apply_flow_word, max_leaf_derivative, same_orbit, FlowWord, OrbitAnswer, OrbitSearch,
};
use optmom::expr;
use optmom::group_action::check_action_axioms;
use optmom::linalg::{Matrix, Subspace, Vector};
use optmom::ode::StepControl;
use optmom::phase_space::{
    bracket_at, flow, symplectic_orthogonal, Chart, PoissonStructure, Probes, SmoothMap,
};
use optmom::report::csv_string;
use optmom::scenarios::{self, quadratic, standard_form};

fn r4() -> PoissonStructure {
    PoissonStructure::constant_symplectic(Arc::new(Chart::euclidean("R4", 4)), standard_form(4))
        .unwrap()
}

fn r3() -> PoissonStructure {
    PoissonStructure::constant_poisson(Arc::new(Chart::euclidean("R3", 3)), scenarios::r3_tensor())
        .unwrap()
}

fn sym(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |v| Matrix::from_vec(n, n, v))
}

fn point(n: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-2.0..2.0f64, n).prop_map(Vector::from_vec)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(
        sf in sym(4), sg in sym(4), sh in sym(4), a in -3.0..3.0f64, b in -3.0..3.0f64, z in point(4),
    ) {
        let p = r4();
        let (f, g, h) = (quadratic("f", sf.clone()), quadratic("g", sg.clone()), quadratic("h", sh));
        let fg = bracket_at(&p, &f, &g, &z).unwrap();
        prop_assert_eq!(fg, -bracket_at(&p, &g, &f, &z).unwrap());
        prop_assert_eq!(bracket_at(&p, &f, &f, &z).unwrap(), 0.0);
        let combo = quadratic("af+bg", sf * a + sg * b);
        let lhs = bracket_at(&p, &combo, &h, &z).unwrap();
        let rhs = a * bracket_at(&p, &f, &h, &z).unwrap() + b * bracket_at(&p, &g, &h, &z).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn leibniz_rule(sf in sym(3), sg in sym(3), sh in sym(3), z in point(3)) {
        let p = r3();
        let (f, g, h) = (quadratic("f", sf), quadratic("g", sg), quadratic("h", sh));
        let lhs = bracket_at(&p, &f.product(&g), &h, &z).unwrap();
        let rhs = f.value(&z) * bracket_at(&p, &g, &h, &z).unwrap()
            + g.value(&z) * bracket_at(&p, &f, &h, &z).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn flow_then_reverse_returns(s in sym(4), z in point(4), t in 0.0..3.0f64) {
        let p = r4();
        // Positive definite, so orbits stay bounded.
        let h = quadratic("h", &s * s.transpose() + Matrix::identity(4, 4));
        let ctrl = StepControl::default();
        let z0 = p.chart().point(z.clone()).unwrap();
        let there = flow(&p, &h, &z0, t, &ctrl).unwrap();
        let back = flow(&p, &h, &there, -t, &ctrl).unwrap();
        let err = (back.coords() - &z).amax();
        prop_assert!(err <= 10.0 * ctrl.rtol * (1.0 + z.amax()), "{:e}", err);
    }

    #[test]
    fn symplectic_orthogonal_is_an_involution(v in prop::collection::vec(point(4), 0..4), z in point(4)) {
        let p = r4();
        let space = Subspace::from_vectors(4, &v);
        let z = p.chart().point(z).unwrap();
        let twice = symplectic_orthogonal(&p, &symplectic_orthogonal(&p, &space, &z).unwrap(), &z).unwrap();
        prop_assert_eq!(twice.dim(), space.dim());
        prop_assert!(twice.max_angle(&space) <= 1e-6);
    }

    #[test]
    fn jacobi_holds_for_every_registered_structure(seed in any::<u64>()) {
        for s in scenarios::all() {
            for case in &s.cases {
                let p = case.e.poisson();
                for z in Probes::new(10, seed).points(p.chart()) {
                    prop_assert!(p.jacobi_residual(&z) <= 1e-8, "{} {}", s.name, case.key);
                    prop_assert!(p.antisymmetry_residual(&z) <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn group_axioms_hold_in_every_scenario(seed in any::<u64>()) {
        for s in scenarios::all() {
            for case in &s.cases {
                let r = check_action_axioms(case.action(), &Probes::new(50, seed), 1e-10);
                prop_assert!(r.passed, "{}", r.text_line());
            }
        }
    }

    #[test]
    fn rank_ignores_field_order(order in Just((0..9).collect::<Vec<usize>>()).prop_shuffle(), z in point(6)) {
        let s = scenarios::c3();
        let case = s.case(Some("s1")).unwrap();
        let d = case.e.base();
        let shuffled = d.permuted(&order);
        let zp = d.chart().point(z).unwrap();
        let (a, b) = (d.rank_at(&zp).unwrap(), shuffled.rank_at(&zp).unwrap());
        prop_assert_eq!(a.rank, b.rank);
        prop_assert!(a.basis.max_angle(&b.basis) <= 1e-6);
    }

    #[test]
    fn flow_word_text_round_trips(
        letters in prop::collection::vec(("[A-Za-z_][A-Za-z0-9_]{0,8}", -1e6..1e6f64), 0..6),
    ) {
        let mut w = FlowWord::empty();
        for (name, t) in &letters {
            w.then(name.clone(), *t);
        }
        let back: FlowWord = w.to_string().parse().unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn parsed_expressions_match_closed_form(
        a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, x in -2.0..2.0f64, y in -2.0..2.0f64,
    ) {
        let vars = vec!["x".to_string(), "y".to_string()];
        let src = format!("{a} * x^2 + {b} * x * y - {c} * sin(y) / (1 + cos(x)^2)");
        let e = expr::parse(&src, &vars).unwrap();
        let direct = a * x * x + b * x * y - c * y.sin() / (1.0 + x.cos().powi(2));
        prop_assert!(close(e.eval(&[x, y]), direct, 1e-14));
    }

    #[test]
    fn equal_seeds_give_identical_csv(seed in any::<u64>()) {
        let s = scenarios::torus();
        let ctx = RunContext::new(seed);
        let a = csv_string(&s.run(&ctx, None).unwrap());
        let b = csv_string(&s.run(&ctx, None).unwrap());
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn yes_answers_replay_to_the_target(t1a in 0.0..2.0 * PI, t1b in 0.0..2.0 * PI, t2 in 0.0..2.0 * PI) {
        let s = scenarios::torus();
        let case = s.case(None).unwrap();
        let d = case.e.base();
        let a = d.chart().point(Vector::from_vec(vec![t1a, t2])).unwrap();
        let b = d.chart().point(Vector::from_vec(vec![t1b, t2])).unwrap();
        let search = OrbitSearch::default();
        let answer = same_orbit(d, &a, &b, &case.e.labels().unwrap().components, &search).unwrap();
        let OrbitAnswer::Yes(w) = answer else {
            return Err(TestCaseError::fail(format!("expected yes, got {answer:?}")));
        };
        let end = apply_flow_word(d, &w, &a).unwrap();
        prop_assert!(d.chart().distance(end.coords(), b.coords()) <= search.tol_reach);
    }

    #[test]
    fn no_witnesses_are_leaf_constant(t1 in 0.0..2.0 * PI, t2a in 0.0..3.0f64, gap in 0.1..3.0f64) {
        let s = scenarios::torus();
        let case = s.case(None).unwrap();
        let d = case.e.base();
        let a = d.chart().point(Vector::from_vec(vec![t1, t2a])).unwrap();
        let b = d.chart().point(Vector::from_vec(vec![t1, t2a + gap])).unwrap();
        let labels = &case.e.labels().unwrap().components;
        let answer = same_orbit(d, &a, &b, labels, &OrbitSearch::default()).unwrap();
        let OrbitAnswer::No(w) = answer else {
            return Err(TestCaseError::fail(format!("expected no, got {answer:?}")));
        };
        let q = labels.iter().find(|q| q.name() == w.name).unwrap();
        let points = Probes::new(100, 7).points(d.chart());
        prop_assert!(max_leaf_derivative(d, q, &points).unwrap() <= 1e-8);
    }

    #[test]
    fn labels_and_isotropy_survive_random_words(seed in any::<u64>()) {
        for s in [scenarios::torus(), scenarios::r3(), scenarios::z2()] {
            let ctx = RunContext::new(seed);
            for r in s.run(&ctx, Some("label.flow_invariant.*")).unwrap()
                .into_iter()
                .chain(s.run(&ctx, Some("isotropy.along_words.*")).unwrap())
            {
                prop_assert!(r.passed, "{}", r.text_line());
            }
        }
    }

    #[test]
    fn signature_functions_are_constant_on_leaves(seed in any::<u64>()) {
        for s in scenarios::all() {
            for case in &s.cases {
                let Ok(labels) = case.e.labels() else { continue };
                let points = Probes::new(200, seed).points(case.e.base().chart());
                for q in &labels.components {
                    let worst = max_leaf_derivative(case.e.base(), q, &points).unwrap();
                    prop_assert!(worst <= 1e-8, "{} {} {:e}", case.key, q.name(), worst);
                }
            }
        }
    }
}

#[test]
fn scalar_maps_from_expressions_are_differentiable() {
    let vars = vec!["x".to_string()];
    let e = expr::parse("x^3", &vars).unwrap();
    let f = SmoothMap::scalar("cube", 1, move |z| e.eval(z.as_slice()));
    let g = f.gradient(&Vector::from_vec(vec![2.0])).unwrap();
    assert!((g[0] - 12.0).abs() < 1e-6);
}
