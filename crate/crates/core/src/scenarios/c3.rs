//! `C³ = R⁶` with `ω = -Im⟨·,·⟩`, under SU(3) and under the diagonal circle.
//!
//! Coordinates are `(x1, y1, x2, y2, x3, y3)` with `z_k = x_k + i y_k`.
//! For SU(3) the only invariant is `½|z|²`, so `E` is the Hopf direction
//! and the label space is the cone over `CP(2)`. For the circle the nine
//! Hermitian quadratics `z_i z̄_j` are invariant and the labels are `½|z|²`;
//! the level `|z| = 1` reduces to `CP(2)`, charted by `(z2/z1, z3/z1)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::checks::{Check, Provenance};
use crate::distribution::ConservedQuantity;
use crate::group_action::{
    classical_momentum, invariant_differential_span_check, isotropy_at, linear_momentum_components,
    GroupAction,
};
use crate::linalg::{Matrix, Vector};
use crate::ode::StepControl;
use crate::optimal_momentum::{
    build_characteristic, check_eq34, label_at, LabelSpec, QuotientAction, Signature, SignatureKind,
};
use crate::phase_space::{flow, Chart, PoissonStructure, Probes, SmoothMap};
use crate::reduction::{LevelSetModel, MwSetup, ReducedChart};
use crate::report::CheckReport;
use crate::tolerances::TOL_MAP;

use super::{
    constant_map, identity_map, quadratic, rank_report, standard_form, ActionCase, ReductionCase,
    Scenario, INVARIANCE_SAMPLES,
};

pub const SU3: &str = "SU3";
pub const S1: &str = "S1";
const PAIRS: [(usize, usize); 3] = [(0, 1), (2, 3), (4, 5)];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Real `6 x 6` form of a complex `3 x 3` matrix.
fn realify(m: &Matrix3<Complex64>) -> Matrix {
    let mut out = Matrix::zeros(6, 6);
    for j in 0..3 {
        for k in 0..3 {
            let (a, b) = (m[(j, k)].re, m[(j, k)].im);
            out[(2 * j, 2 * k)] = a;
            out[(2 * j, 2 * k + 1)] = -b;
            out[(2 * j + 1, 2 * k)] = b;
            out[(2 * j + 1, 2 * k + 1)] = a;
        }
    }
    out
}

fn gell_mann() -> [Matrix3<Complex64>; 8] {
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    let s = 1.0 / 3f64.sqrt();
    [
        Matrix3::new(o, l, o, l, o, o, o, o, o),
        Matrix3::new(o, -i, o, i, o, o, o, o, o),
        Matrix3::new(l, o, o, o, -l, o, o, o, o),
        Matrix3::new(o, o, l, o, o, o, l, o, o),
        Matrix3::new(o, o, -i, o, o, o, i, o, o),
        Matrix3::new(o, o, o, o, o, l, o, l, o),
        Matrix3::new(o, o, o, o, o, -i, o, i, o),
        Matrix3::new(l * s, o, o, o, l * s, o, o, o, c(-2.0 * s, 0.0)),
    ]
}

/// `iλ_a` for the eight Gell-Mann matrices, as real `6 x 6` generators.
pub fn su3_generators() -> Vec<Matrix> {
    gell_mann()
        .iter()
        .map(|m| realify(&(m * c(0.0, 1.0))))
        .collect()
}

/// The subgroup of SU(3) preserving the complex line through `u`: the
/// block `S(U(1) x U(2))` conjugated by a unitary taking `e1` to `[u]`.
pub fn su3_stabilizer(chart: Arc<Chart>, u: &Vector) -> crate::Result<GroupAction> {
    let uc = Vector3::new(c(u[0], u[1]), c(u[2], u[3]), c(u[4], u[5]));
    let mut m = nalgebra::Matrix3x4::<Complex64>::zeros();
    m.set_column(0, &uc);
    for k in 0..3 {
        m[(k, k + 1)] = c(1.0, 0.0);
    }
    let q = m.qr().q();
    let lam = gell_mann();
    let basis = [2, 5, 6, 7]
        .iter()
        .map(|&a| realify(&(q * lam[a] * c(0.0, 1.0) * q.adjoint())))
        .collect();
    GroupAction::matrix_lie("SU3_rho", chart, basis)
}

/// The Hermitian quadratics `Re z_i z̄_j` (`i ≤ j`) and `Im z_i z̄_j` (`i < j`).
pub fn hermitian_components() -> Vec<SmoothMap> {
    let mut out = Vec::new();
    for i in 0..3 {
        for j in i..3 {
            let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
            let mut s = Matrix::zeros(6, 6);
            s[(xi, xj)] += 1.0;
            s[(xj, xi)] += 1.0;
            s[(yi, yj)] += 1.0;
            s[(yj, yi)] += 1.0;
            out.push(quadratic(&format!("re_z{}z{}", i + 1, j + 1), s));
            if i < j {
                let mut s = Matrix::zeros(6, 6);
                s[(yi, xj)] = 1.0;
                s[(xj, yi)] = 1.0;
                s[(xi, yj)] = -1.0;
                s[(yj, xi)] = -1.0;
                out.push(quadratic(&format!("im_z{}z{}", i + 1, j + 1), s));
            }
        }
    }
    out
}

fn half_norm2() -> SmoothMap {
    quadratic("half_norm2", Matrix::identity(6, 6))
}

/// `(z2/z1, z3/z1)` as four reals, defined where `z1 ≠ 0`.
pub fn affine_projection() -> SmoothMap {
    let ratios = |z: &Vector| {
        let (a, b) = (z[0], z[1]);
        let d = a * a + b * b;
        let mut w = Vector::zeros(4);
        for k in 0..2 {
            let (p, q) = (z[2 + 2 * k], z[3 + 2 * k]);
            w[2 * k] = (p * a + q * b) / d;
            w[2 * k + 1] = (q * a - p * b) / d;
        }
        w
    };
    SmoothMap::vector("affine_cp2", 6, 4, ratios).with_jacobian(|z| {
        let (a, b) = (z[0], z[1]);
        let d = a * a + b * b;
        let mut m = Matrix::zeros(4, 6);
        for k in 0..2 {
            let (pi, qi) = (2 + 2 * k, 3 + 2 * k);
            let (p, q) = (z[pi], z[qi]);
            let (u, v) = (p * a + q * b, q * a - p * b);
            let (r, s) = (2 * k, 2 * k + 1);
            m[(r, 0)] = p / d - 2.0 * a * u / (d * d);
            m[(r, 1)] = q / d - 2.0 * b * u / (d * d);
            m[(s, 0)] = q / d - 2.0 * a * v / (d * d);
            m[(s, 1)] = -p / d - 2.0 * b * v / (d * d);
            m[(r, pi)] = a / d;
            m[(r, qi)] = b / d;
            m[(s, pi)] = -b / d;
            m[(s, qi)] = a / d;
        }
        m
    })
}

/// `w ↦ r (1, w) / |(1, w)|`.
pub fn affine_section(r: f64) -> SmoothMap {
    let lift = |w: &Vector| {
        let mut c = Vector::zeros(6);
        c[0] = 1.0;
        c.rows_mut(2, 4).copy_from(w);
        c
    };
    SmoothMap::vector("affine_lift", 4, 6, move |w| {
        let c = lift(w);
        let n = c.norm();
        c * (r / n)
    })
    .with_jacobian(move |w| {
        let c = lift(w);
        let n = c.norm();
        let mut m = Matrix::zeros(6, 4);
        for j in 0..4 {
            let mut col = -&c * (w[j] / (n * n * n));
            col[2 + j] += 1.0 / n;
            m.set_column(j, &(col * r));
        }
        m
    })
}

/// `(w, φ) ↦ e^{iφ} (1, w) / |(1, w)|`: the unit sphere over the affine chart.
fn sphere_parametrization() -> SmoothMap {
    let section = affine_section(1.0);
    SmoothMap::vector("unit_sphere", 5, 6, move |p| {
        let z = section.eval(&p.rows(0, 4).into_owned());
        let (cs, sn) = (p[4].cos(), p[4].sin());
        let mut out = Vector::zeros(6);
        for (x, y) in PAIRS {
            out[x] = cs * z[x] - sn * z[y];
            out[y] = sn * z[x] + cs * z[y];
        }
        out
    })
}

fn chart() -> Arc<Chart> {
    Arc::new(Chart::euclidean("C3", 6))
}

fn unit_e1() -> Vector {
    let mut e1 = Vector::zeros(6);
    e1[0] = 1.0;
    e1
}

fn su3_case(chart: &Arc<Chart>, poisson: &PoissonStructure) -> ActionCase {
    let su3 = GroupAction::matrix_lie(SU3, chart.clone(), su3_generators()).expect("su(3)");
    let labels = LabelSpec {
        components: hermitian_components()
            .into_iter()
            .map(ConservedQuantity::new)
            .collect(),
        kind: SignatureKind::ProjectiveCone {
            pairs: PAIRS.to_vec(),
        },
    };
    let e = build_characteristic(
        &su3,
        poisson,
        vec![half_norm2().tagged(SU3)],
        &Probes::new(INVARIANCE_SAMPLES, 0),
    )
    .expect("invariant family")
    .with_labels(labels);
    let e1 = unit_e1();
    let label = label_at(&e, &e1).expect("label");
    let level = LevelSetModel::new(
        label,
        SmoothMap::vector("hopf_circle", 1, 6, |p| {
            let mut z = Vector::zeros(6);
            z[0] = p[0].cos();
            z[1] = p[0].sin();
            z
        }),
        Arc::new(|rng| Vector::from_element(1, rand::Rng::random_range(rng, 0.0..2.0 * PI))),
    );
    let reduced = ReducedChart::new(
        constant_map("to_point", 6, Vector::zeros(0)),
        constant_map("lift", 0, e1.clone()),
    )
    .expect("chart");
    ActionCase {
        key: "su3".into(),
        reductions: vec![ReductionCase {
            name: "cone_point".into(),
            level,
            chart: reduced,
            g_rho: su3_stabilizer(chart.clone(), &e1).expect("stabilizer"),
            mw: None,
            hamiltonians: Vec::new(),
            expected_dim: 0,
        }],
        e,
        momentum: None,
        quotient_action: QuotientAction::LinearOnCone,
        horizon: 1.0,
        canonical: true,
    }
}

/// `Re z1 z̄2` and `Im z1 z̄2`.
pub fn mixing_hamiltonians() -> [SmoothMap; 2] {
    let comps = hermitian_components();
    let find = |n: &str| {
        comps
            .iter()
            .find(|c| c.name() == n)
            .expect("component")
            .clone()
    };
    [find("re_z1z2").tagged(S1), find("im_z1z2").tagged(S1)]
}

fn s1_case(chart: &Arc<Chart>, poisson: &PoissonStructure) -> ActionCase {
    let s1 =
        GroupAction::torus(S1, chart.clone(), PAIRS.to_vec(), vec![vec![-1]; 3]).expect("circle");
    let sigma = hermitian_components()
        .into_iter()
        .map(|s| s.tagged(S1))
        .collect();
    let e = build_characteristic(&s1, poisson, sigma, &Probes::new(INVARIANCE_SAMPLES, 0))
        .expect("invariant family")
        .with_labels(LabelSpec::components(vec![ConservedQuantity::new(
            half_norm2(),
        )]));
    let j = classical_momentum(
        &s1,
        poisson,
        Some(linear_momentum_components(&s1, poisson).expect("linear action")),
        &Probes::new(20, 0),
        TOL_MAP,
    )
    .expect("momentum map");
    let label = label_at(&e, &unit_e1()).expect("label");
    let level = LevelSetModel::new(
        label,
        sphere_parametrization(),
        Arc::new(|rng| {
            let mut p = Vector::zeros(5);
            for k in 0..4 {
                p[k] = rand::Rng::random_range(rng, -1.0..1.0);
            }
            p[4] = rand::Rng::random_range(rng, 0.0..2.0 * PI);
            p
        }),
    );
    let reduced = ReducedChart::new(affine_projection(), affine_section(1.0)).expect("chart");
    let mw = MwSetup {
        mu: Vector::from_element(1, 0.5),
        chart: reduced.clone(),
        to_optimal: identity_map("id_cp2", 4),
    };
    ActionCase {
        key: "s1".into(),
        reductions: vec![ReductionCase {
            name: "cp2_r1".into(),
            level,
            chart: reduced,
            g_rho: s1.clone(),
            mw: Some(mw),
            hamiltonians: mixing_hamiltonians().to_vec(),
            expected_dim: 4,
        }],
        e,
        momentum: Some(j),
        quotient_action: QuotientAction::Trivial,
        horizon: 1.0,
        canonical: true,
    }
}

pub fn c3() -> Scenario {
    let chart = chart();
    let poisson =
        PoissonStructure::constant_symplectic(chart.clone(), standard_form(6)).expect("ω");
    let mut s = Scenario::new(
        "c3",
        "C³ under SU(3) (cone labels) and the diagonal circle (level ½|z|²)",
    );
    let su3 = s.add_case(su3_case(&chart, &poisson));
    let s1 = s.add_case(s1_case(&chart, &poisson));

    use Provenance::*;
    let c = su3.clone();
    s.push(Check::new("flow.period.su3", Paper, move |ctx| {
        let h = half_norm2();
        let mut r = CheckReport::new("", 1e-7);
        for z in ctx.probes("flow.period.su3", 20).points(c.e.base().chart()) {
            let start = c.e.base().chart().point(z.clone())?;
            let end = flow(c.e.poisson(), &h, &start, 2.0 * PI, &StepControl::default())?;
            r.record((end.coords() - &z).norm());
        }
        Ok(r)
    }));
    let c = su3.clone();
    s.push(Check::new("rank.generic.su3", Derived, move |ctx| {
        let points = ctx
            .probes("rank.generic.su3", 50)
            .points(c.e.base().chart());
        Ok(rank_report("", &c, &points, 1))
    }));
    let c = su3.clone();
    s.push(Check::new("rank.origin.su3", Derived, move |_| {
        Ok(rank_report("", &c, &[Vector::zeros(6)], 0))
    }));
    let c = su3.clone();
    s.push(Check::new("isotropy.dim.su3", Derived, move |ctx| {
        let mut r = CheckReport::new("", 0.0);
        r.record(
            isotropy_at(c.action(), &Vector::zeros(6))
                .algebra_dim()
                .abs_diff(8) as f64,
        );
        for z in ctx
            .probes("isotropy.dim.su3", 20)
            .points(c.e.base().chart())
        {
            r.record(isotropy_at(c.action(), &z).algebra_dim().abs_diff(3) as f64);
        }
        Ok(r)
    }));
    let c = su3;
    s.push(Check::new("label.cone.su3", Paper, move |ctx| {
        let spec = c.e.labels()?;
        let mut r = CheckReport::new("", ctx.tolerances.reach);
        let apex = label_at(&c.e, &Vector::zeros(6))?;
        r.record(if apex.signature == Signature::Apex {
            0.0
        } else {
            1.0
        });
        for z in ctx.probes("label.cone.su3", 50).points(c.e.base().chart()) {
            let radius = z.norm();
            let expected = Signature::Cone {
                representative: PAIRS
                    .iter()
                    .map(|&(x, y)| Complex64::new(z[x], z[y]) / radius)
                    .collect(),
                radius,
            };
            r.record(label_at(&c.e, &z)?.signature.distance(&expected, spec));
        }
        Ok(r)
    }));
    let c = s1.clone();
    s.push(Check::new("momentum.half_norm2.s1", Paper, move |ctx| {
        let j = c.momentum.as_ref().expect("declared");
        let mut r = CheckReport::new("", ctx.tolerances.inv);
        for z in ctx
            .probes("momentum.half_norm2.s1", 20)
            .points(c.e.base().chart())
        {
            r.record((j.value(&z)[0] - 0.5 * z.norm_squared()).abs());
        }
        Ok(r)
    }));
    let c = s1.clone();
    s.push(Check::new("eq34.origin.s1", Derived, move |ctx| {
        let j = c.momentum.as_ref().expect("declared");
        let cmp = check_eq34(&c.e, j, &c.e.base().chart().point(Vector::zeros(6))?)?;
        let mut r = CheckReport::new("", ctx.tolerances.angle);
        if cmp.dims() != (0, 0) {
            r.fail(format!("dimensions {:?}", cmp.dims()));
        }
        r.record(cmp.max_angle);
        Ok(r)
    }));
    let c = s1;
    s.push(Check::new("span.free.s1", Derived, move |ctx| {
        let mut r = CheckReport::new("", ctx.tolerances.angle);
        for z in ctx.probes("span.free.s1", 20).points(c.e.base().chart()) {
            let rep = invariant_differential_span_check(
                c.action(),
                c.e.sigma(),
                &c.e.base().chart().point(z)?,
            )?;
            if !rep.dims_agree() {
                r.fail("dimensions differ");
            }
            r.record(rep.max_angle);
        }
        Ok(r)
    }));
    s
}
