//! `R³` with the constant tensor `B = [[0,1,0],[-1,0,1],[0,-1,0]]` and
//! translations along `x`. The invariants `y, z` span a rank-2 `E` whose
//! leaves are the planes `x + z = const`; `x + z` is a Casimir.

use std::sync::Arc;

use crate::checks::{Check, Provenance};
use crate::distribution::{
    check_involutivity, ConservedQuantity, GeneralizedDistribution, WordSampler,
};
use crate::error::Error;
use crate::group_action::GroupAction;
use crate::linalg::{Matrix, Vector};
use crate::optimal_momentum::{build_characteristic, random_quadratic, LabelSpec, QuotientAction};
use crate::phase_space::{hamiltonian_vector_field, Chart, PoissonStructure, Probes, SmoothMap};
use crate::report::CheckReport;

use super::{
    momentum_absent, rank_report, scalar, sigma_map, ActionCase, Scenario, INVARIANCE_SAMPLES,
};

pub const ACTION: &str = "R";

pub fn tensor() -> Matrix {
    Matrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0])
}

fn coordinate(name: &str, i: usize) -> SmoothMap {
    scalar(
        name,
        3,
        move |z| z[i],
        move |_| {
            let mut g = Vector::zeros(3);
            g[i] = 1.0;
            g
        },
    )
}

/// `∂x` and `∂y + x ∂z`: a bracket-generating pair on `R³`.
pub fn contact_pair() -> GeneralizedDistribution {
    let chart = Arc::new(Chart::euclidean("R3c", 3));
    GeneralizedDistribution::new(chart)
        .with_field(SmoothMap::vector("dx", 3, 3, |_| {
            Vector::from_vec(vec![1.0, 0.0, 0.0])
        }))
        .and_then(|d| {
            d.with_field(SmoothMap::vector("dy_xdz", 3, 3, |z| {
                Vector::from_vec(vec![0.0, 1.0, z[0]])
            }))
        })
        .expect("contact pair")
}

pub fn r3() -> Scenario {
    let chart = Arc::new(Chart::euclidean("R3", 3));
    let poisson = PoissonStructure::constant_poisson(chart.clone(), tensor()).expect("B");
    let translation = GroupAction::translation(
        ACTION,
        chart.clone(),
        Matrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
        vec![None],
    )
    .expect("translation");
    let sigma = vec![
        coordinate("y", 1).tagged(ACTION),
        coordinate("z", 2).tagged(ACTION),
    ];
    let casimir = scalar(
        "x_plus_z",
        3,
        |z| z[0] + z[2],
        |_| Vector::from_vec(vec![1.0, 0.0, 1.0]),
    );
    let e = build_characteristic(
        &translation,
        &poisson,
        sigma,
        &Probes::new(INVARIANCE_SAMPLES, 0),
    )
    .expect("invariant family")
    .with_labels(LabelSpec::components(vec![ConservedQuantity::new(
        casimir.clone(),
    )]));

    let mut s = Scenario::new(
        "r3",
        "R³ with a constant Poisson tensor and x-translations: labels x + z",
    );
    let case = s.add_case(ActionCase {
        key: "translation".into(),
        e,
        momentum: None,
        quotient_action: QuotientAction::Undeclared,
        reductions: Vec::new(),
        horizon: 1.0,
        canonical: true,
    });

    use Provenance::*;
    let c = case.clone();
    s.push(Check::new("field.x_y", Paper, move |ctx| {
        let y = &c.e.sigma()[0];
        let x_y = hamiltonian_vector_field(c.e.poisson(), y)?;
        let expected = Vector::from_vec(vec![1.0, 0.0, -1.0]);
        let mut r = CheckReport::new("", 1e-10);
        for z in ctx.probes("field.x_y", 100).points(c.e.base().chart()) {
            let analytic = (x_y.eval(&z) - &expected).amax();
            let fd = c.e.poisson().tensor(&z) * y.fd_only_jacobian(&z).row(0).transpose();
            r.record(analytic.max((fd - &expected).amax()));
        }
        Ok(r)
    }));
    let c = case.clone();
    let grad = casimir.clone();
    s.push(Check::new("casimir.x_plus_z", Trivial, move |ctx| {
        let mut r = CheckReport::new("", 1e-12);
        for z in ctx
            .probes("casimir.x_plus_z", 20)
            .points(c.e.base().chart())
        {
            r.record((c.e.poisson().tensor(&z) * grad.gradient(&z)?).norm());
        }
        Ok(r)
    }));
    let c = case.clone();
    s.push(Check::new("label.conserved.random", Paper, move |ctx| {
        let p = ctx.probes("label.conserved.random", 20);
        let mut rng = p.rng();
        let smap = sigma_map(c.e.sigma(), 3, ACTION);
        let points = Probes::new(100, p.seed).points(c.e.base().chart());
        let mut r = CheckReport::new("", 1e-10);
        for _ in 0..p.count {
            let f = random_quadratic(2, &mut rng).compose(&smap);
            let x_f = hamiltonian_vector_field(c.e.poisson(), &f)?;
            let worst = points
                .iter()
                .map(|z| Ok(casimir.gradient(z)?.dot(&x_f.eval(z)).abs()))
                .collect::<Result<Vec<f64>, Error>>()?
                .into_iter()
                .fold(0.0, f64::max);
            r.record(worst);
        }
        r.probes *= points.len();
        Ok(r)
    }));
    let c = case.clone();
    s.push(Check::new("rank.translation", Derived, move |ctx| {
        let points = ctx
            .probes("rank.translation", 50)
            .points(c.e.base().chart());
        Ok(rank_report("", &c, &points, 2))
    }));
    s.push(momentum_absent(
        "momentum.absent.translation",
        Derived,
        &case,
    ));
    s.push(Check::control(
        "control.involutive.contact",
        Derived,
        0.1,
        |ctx| {
            Ok(check_involutivity(
                &contact_pair(),
                &ctx.probes("control.involutive.contact", 30),
                &WordSampler::default(),
                ctx.tolerances.involutive,
            ))
        },
    ));
    s
}
