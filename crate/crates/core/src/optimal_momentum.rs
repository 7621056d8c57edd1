//! The characteristic distribution of a canonical action, optimal momentum
//! labels, and checks of the conservation and universality properties.

use std::fmt;

use num_complex::Complex64;

use crate::distribution::{
    apply_flow_word_recorded, max_leaf_derivative, same_orbit, ConservedQuantity,
    GeneralizedDistribution, OrbitAnswer, OrbitSearch, WordSampler,
};
use crate::error::{Error, Result};
use crate::group_action::{
    fixed_tangent, isotropy_at, validate_invariance, ClassicalMomentumMap, GroupAction,
    GroupElement, NOETHER_CHECKPOINTS,
};
use crate::linalg::{Matrix, Subspace, Vector};
use crate::ode::{self, StepControl};
use crate::phase_space::{
    bracket_at, fd_jacobian, hamiltonian_vector_field, PhasePoint, PoissonStructure, Probes,
    SmoothMap,
};
use crate::report::CheckReport;
use crate::tolerances::TOL_INV;

/// How label signatures are presented and compared.
#[derive(Clone, Debug, PartialEq)]
pub enum SignatureKind {
    /// The component values themselves.
    Components,
    /// A point of the cone over complex projective space: the unit
    /// representative of `[z]` and the radius `|z|`, with the apex at `z = 0`.
    /// `pairs` lists the (real, imaginary) coordinate indices.
    ProjectiveCone { pairs: Vec<(usize, usize)> },
}

/// A complete set of leaf invariants for one action.
#[derive(Clone, Debug)]
pub struct LabelSpec {
    pub components: Vec<ConservedQuantity>,
    pub kind: SignatureKind,
}

impl LabelSpec {
    pub fn components(components: Vec<ConservedQuantity>) -> Self {
        Self {
            components,
            kind: SignatureKind::Components,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn values(&self, z: &Vector) -> Vector {
        Vector::from_iterator(
            self.components.len(),
            self.components.iter().map(|c| c.value(z)),
        )
    }

    /// All components folded into a map `R^n -> R^k`, for pulling back
    /// functions on the label space.
    pub fn component_map(&self, n: usize) -> SmoothMap {
        let (a, b) = (self.components.clone(), self.components.clone());
        let k = a.len();
        SmoothMap::vector("label", n, k, move |z| {
            Vector::from_iterator(k, a.iter().map(|c| c.map.value(z)))
        })
        .with_jacobian(move |z| {
            let mut m = Matrix::zeros(k, n);
            for (i, c) in b.iter().enumerate() {
                let g = c
                    .map
                    .gradient(z)
                    .expect("label components are differentiable");
                m.set_row(i, &g.transpose());
            }
            m
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Signature {
    Values(Vec<f64>),
    Cone {
        representative: Vec<Complex64>,
        radius: f64,
    },
    Apex,
}

/// `𝒥(z)`: the signature of the leaf through `z` and the isotropy class.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalLabel {
    pub signature: Signature,
    pub isotropy_class: String,
}

const APEX_RADIUS: f64 = 1e-12;

fn cone_signature(z: &Vector, pairs: &[(usize, usize)]) -> Signature {
    let w: Vec<Complex64> = pairs
        .iter()
        .map(|&(x, y)| Complex64::new(z[x], z[y]))
        .collect();
    let radius = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if radius < APEX_RADIUS {
        return Signature::Apex;
    }
    let lead = w
        .iter()
        .copied()
        .find(|c| c.norm() > 1e-8 * radius)
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = lead.conj() / lead.norm();
    Signature::Cone {
        representative: w.iter().map(|c| c * phase / radius).collect(),
        radius,
    }
}

fn phase_distance(u: &[Complex64], v: &[Complex64]) -> f64 {
    let inner: Complex64 = u.iter().zip(v).map(|(a, b)| a * b.conj()).sum();
    let phase = if inner.norm() > 0.0 {
        inner / inner.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - phase * b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

impl Signature {
    /// Distance between signatures; cone representatives are compared
    /// modulo phase and weighted by radius.
    pub fn distance(&self, other: &Signature, spec: &LabelSpec) -> f64 {
        match (self, other) {
            (Signature::Values(a), Signature::Values(b)) => spec
                .components
                .iter()
                .zip(a.iter().zip(b))
                .map(|(c, (x, y))| c.difference(*x, *y).abs())
                .fold(0.0, f64::max),
            (Signature::Apex, Signature::Apex) => 0.0,
            (Signature::Apex, Signature::Cone { radius, .. })
            | (Signature::Cone { radius, .. }, Signature::Apex) => *radius,
            (
                Signature::Cone {
                    representative: u,
                    radius: r,
                },
                Signature::Cone {
                    representative: v,
                    radius: s,
                },
            ) => (r - s).abs().max(r.min(*s) * phase_distance(u, v)),
            _ => f64::INFINITY,
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signature::Values(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:.9}")).collect();
                write!(f, "({})", parts.join(", "))
            }
            Signature::Apex => write!(f, "*"),
            Signature::Cone {
                representative,
                radius,
            } => {
                let parts: Vec<String> = representative
                    .iter()
                    .map(|c| format!("{:.9}{:+.9}i", c.re, c.im))
                    .collect();
                write!(f, "([{}], {radius:.9})", parts.join(" : "))
            }
        }
    }
}

impl fmt::Display for OptimalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}", self.signature, self.isotropy_class)
    }
}

/// The action induced on labels, when the scenario declares one.
#[derive(Clone, Debug, PartialEq)]
pub enum QuotientAction {
    Undeclared,
    Trivial,
    /// The linear group element acts on the cone representative.
    LinearOnCone,
}

/// `E = span{X_{σ_1}, …, X_{σ_k}}` together with the action, the structure,
/// and (optionally) the label signature.
#[derive(Clone, Debug)]
pub struct CharacteristicDistribution {
    base: GeneralizedDistribution,
    action: GroupAction,
    poisson: PoissonStructure,
    sigma: Vec<SmoothMap>,
    labels: Option<LabelSpec>,
}

/// Validate the invariance tags of `sigma` and span `E` by their
/// Hamiltonian vector fields.
pub fn build_characteristic(
    action: &GroupAction,
    poisson: &PoissonStructure,
    sigma: Vec<SmoothMap>,
    probes: &Probes,
) -> Result<CharacteristicDistribution> {
    if action.chart().id() != poisson.chart().id() {
        return Err(Error::ChartMismatch {
            expected: poisson.chart().id().into(),
            found: action.chart().id().into(),
        });
    }
    let mut base = GeneralizedDistribution::new(poisson.chart().clone());
    for s in &sigma {
        if s.invariance_tag() != Some(action.name()) {
            return Err(Error::Validation(format!(
                "`{}` is not tagged invariant under `{}`",
                s.name(),
                action.name()
            )));
        }
        let r = validate_invariance(action, s, probes, TOL_INV);
        if !r.passed {
            return Err(Error::Validation(format!(
                "`{}` fails invariance under `{}` (residual {:.3e})",
                s.name(),
                action.name(),
                r.max_residual
            )));
        }
        base.push(hamiltonian_vector_field(poisson, s)?, None)?;
    }
    Ok(CharacteristicDistribution {
        base,
        action: action.clone(),
        poisson: poisson.clone(),
        sigma,
        labels: None,
    })
}

impl CharacteristicDistribution {
    pub fn with_labels(mut self, labels: LabelSpec) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn base(&self) -> &GeneralizedDistribution {
        &self.base
    }

    pub fn action(&self) -> &GroupAction {
        &self.action
    }

    pub fn poisson(&self) -> &PoissonStructure {
        &self.poisson
    }

    pub fn sigma(&self) -> &[SmoothMap] {
        &self.sigma
    }

    pub fn labels(&self) -> Result<&LabelSpec> {
        self.labels
            .as_ref()
            .ok_or_else(|| Error::Precondition("no label signature declared".into()))
    }

    pub fn fiber(&self, z: &Vector) -> Subspace {
        self.base.fiber(z)
    }

    fn require_tag(&self, h: &SmoothMap) -> Result<()> {
        if h.invariance_tag() == Some(self.action.name()) {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "Hamiltonian `{}` is not tagged invariant under `{}`",
                h.name(),
                self.action.name()
            )))
        }
    }
}

pub fn optimal_label(e: &CharacteristicDistribution, z: &PhasePoint) -> Result<OptimalLabel> {
    if z.chart_id() != e.base.chart().id() {
        return Err(Error::ChartMismatch {
            expected: e.base.chart().id().into(),
            found: z.chart_id().into(),
        });
    }
    label_at(e, z.coords())
}

pub fn label_at(e: &CharacteristicDistribution, z: &Vector) -> Result<OptimalLabel> {
    let spec = e.labels()?;
    let signature = match &spec.kind {
        SignatureKind::Components => Signature::Values(spec.values(z).iter().copied().collect()),
        SignatureKind::ProjectiveCone { pairs } => cone_signature(z, pairs),
    };
    Ok(OptimalLabel {
        signature,
        isotropy_class: isotropy_at(&e.action, z).class_id,
    })
}

/// Signature distance, infinite across isotropy classes.
pub fn label_distance(
    e: &CharacteristicDistribution,
    a: &OptimalLabel,
    b: &OptimalLabel,
) -> Result<f64> {
    if a.isotropy_class != b.isotropy_class {
        return Ok(f64::INFINITY);
    }
    Ok(a.signature.distance(&b.signature, e.labels()?))
}

fn drift_along(
    field: &SmoothMap,
    z: &Vector,
    horizon: f64,
    values: impl Fn(&Vector) -> Vec<(f64, f64)>,
) -> Result<f64> {
    let f = |x: &Vector| field.eval(x);
    let ctrl = StepControl::default();
    let dt = horizon / NOETHER_CHECKPOINTS as f64;
    let mut state = z.clone();
    let mut worst: f64 = 0.0;
    let start = values(z);
    for _ in 0..NOETHER_CHECKPOINTS {
        state = ode::integrate(&f, &state, dt, &ctrl, None)?.end;
        for ((_, now), (period, then)) in values(&state).iter().zip(&start) {
            let mut d = now - then;
            if *period > 0.0 {
                d = (d + 0.5 * period).rem_euclid(*period) - 0.5 * period;
            }
            worst = worst.max(d.abs());
        }
    }
    Ok(worst)
}

/// Largest drift of any label component along the flow of `h` up to
/// `horizon`, from sampled points.
pub fn check_optimal_noether(
    e: &CharacteristicDistribution,
    h: &SmoothMap,
    horizon: f64,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    e.require_tag(h)?;
    let spec = e.labels()?.clone();
    let field = hamiltonian_vector_field(&e.poisson, h)?;
    let mut report = CheckReport::new("noether.optimal", tol);
    let values = |x: &Vector| -> Vec<(f64, f64)> {
        spec.components
            .iter()
            .map(|c| (c.period.unwrap_or(0.0), c.map.value(x)))
            .collect()
    };
    for z in probes.points(e.base.chart()) {
        report.record(drift_along(&field, &z, horizon, values)?);
    }
    Ok(report)
}

/// Comparison of two subspaces at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceComparison {
    pub lhs: Subspace,
    pub rhs: Subspace,
    pub max_angle: f64,
}

impl SubspaceComparison {
    pub fn new(lhs: Subspace, rhs: Subspace) -> Self {
        Self {
            max_angle: lhs.max_angle(&rhs),
            lhs,
            rhs,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.lhs.dim(), self.rhs.dim())
    }
}

/// `E(z)` against `ker T_zJ ∩ T_z M_{G_z}`.
pub fn check_eq34(
    e: &CharacteristicDistribution,
    j: &ClassicalMomentumMap,
    z: &PhasePoint,
) -> Result<SubspaceComparison> {
    if !e.action.is_proper() {
        return Err(Error::Precondition(format!(
            "action `{}` is not declared proper",
            e.action.name()
        )));
    }
    if j.action_name() != e.action.name() {
        return Err(Error::Precondition(format!(
            "momentum map belongs to `{}`, not `{}`",
            j.action_name(),
            e.action.name()
        )));
    }
    let zc = z.coords();
    let n = zc.len();
    let kernel = if j.dim() == 0 {
        Subspace::full(n)
    } else {
        let jac = j.jacobian(zc)?;
        if crate::linalg::max_abs(&jac) == 0.0 {
            Subspace::full(n)
        } else {
            Subspace::span(&crate::linalg::null_space(
                &jac,
                crate::linalg::RANK_REL_TOL,
            ))
        }
    };
    let iso = isotropy_at(&e.action, zc);
    let rhs = kernel.intersection(&fixed_tangent(&e.action, &iso));
    Ok(SubspaceComparison::new(e.fiber(zc), rhs))
}

fn related_pair<R: rand::Rng>(
    e: &CharacteristicDistribution,
    rng: &mut R,
    sampler: &WordSampler,
) -> Option<(Vector, Vector, crate::distribution::FlowWord)> {
    let z = e.base.chart().sample(rng);
    let w = sampler.sample(&e.base, rng);
    apply_flow_word_recorded(&e.base, &w, &z, &StepControl::default())
        .ok()
        .map(|(end, _)| (z, end, w))
}

/// `K(m) = K(m')` whenever `same_orbit` certifies `m ~ m'`. Pairs are made by
/// flowing sampled points along random words; pairs the search cannot
/// certify are skipped and counted.
pub fn check_universality(
    e: &CharacteristicDistribution,
    k: &SmoothMap,
    probes: &Probes,
    sampler: &WordSampler,
    search: &OrbitSearch,
    tol: f64,
) -> Result<CheckReport> {
    let spec = e.labels()?;
    let chart = e.base.chart().clone();
    let mut report = CheckReport::new(format!("universality.{}", k.name()), tol);
    let mut rng = probes.rng();
    let mut uncertified = 0;
    for _ in 0..probes.count {
        let Some((z, end, _)) = related_pair(e, &mut rng, sampler) else {
            uncertified += 1;
            continue;
        };
        let a = chart.point(z)?;
        let b = chart.point(end)?;
        match same_orbit(&e.base, &a, &b, &spec.components, search)? {
            OrbitAnswer::Yes(_) => {
                let (ka, kb) = (k.eval(a.coords()), k.eval(b.coords()));
                report.record((ka - kb).amax());
            }
            _ => uncertified += 1,
        }
    }
    if uncertified > 0 {
        report.note(format!(
            "{uncertified} pairs not certified as orbit-equivalent"
        ));
    }
    Ok(report)
}

fn act_on_label(
    e: &CharacteristicDistribution,
    action: &QuotientAction,
    g: &GroupElement,
    label: &OptimalLabel,
) -> Result<Option<OptimalLabel>> {
    match action {
        QuotientAction::Undeclared => Ok(None),
        QuotientAction::Trivial => Ok(Some(label.clone())),
        QuotientAction::LinearOnCone => {
            let spec = e.labels()?;
            let SignatureKind::ProjectiveCone { pairs } = &spec.kind else {
                return Err(Error::Precondition(
                    "linear label action needs a projective cone signature".into(),
                ));
            };
            let signature = match &label.signature {
                Signature::Cone {
                    representative,
                    radius,
                } => {
                    let n = e.base.chart().dim();
                    let mut z = Vector::zeros(n);
                    for (&(x, y), c) in pairs.iter().zip(representative) {
                        z[x] = c.re * radius;
                        z[y] = c.im * radius;
                    }
                    let m = e
                        .action
                        .linear_map(g)
                        .ok_or_else(|| Error::Precondition("non-linear action".into()))?;
                    cone_signature(&(m * z), pairs)
                }
                other => other.clone(),
            };
            Ok(Some(OptimalLabel {
                signature,
                isotropy_class: label.isotropy_class.clone(),
            }))
        }
    }
}

/// Well-definedness of the induced action on labels, and agreement with a
/// declared label action.
pub fn induced_action_check(
    e: &CharacteristicDistribution,
    quotient: &QuotientAction,
    probes: &Probes,
    sampler: &WordSampler,
    tol: f64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("induced_action", tol);
    let mut rng = probes.rng();
    for _ in 0..probes.count {
        let Some((z, end, _)) = related_pair(e, &mut rng, sampler) else {
            continue;
        };
        let g = e.action.sample(&mut rng);
        let gz = label_at(e, &e.action.act(&g, &z))?;
        let gzp = label_at(e, &e.action.act(&g, &end))?;
        let mut worst = label_distance(e, &gz, &gzp)?;
        if let Some(expected) = act_on_label(e, quotient, &g, &label_at(e, &z)?)? {
            worst = worst.max(label_distance(e, &gz, &expected)?);
        }
        report.record(worst);
    }
    Ok(report)
}

/// `{f, g}_{M/E}(𝒥(z)) = {f∘𝒥, g∘𝒥}(z)` for `f, g` functions of the label
/// components.
pub fn quotient_bracket(
    e: &CharacteristicDistribution,
    f: &SmoothMap,
    g: &SmoothMap,
    z: &PhasePoint,
) -> Result<f64> {
    let spec = e.labels()?;
    if f.input_dim() != spec.len() || g.input_dim() != spec.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.len(),
            found: f.input_dim(),
        });
    }
    let c = spec.component_map(e.base.chart().dim());
    bracket_at(&e.poisson, &f.compose(&c), &g.compose(&c), z.coords())
}

/// Lift independence of the quotient bracket: values at `z` and at a point
/// reached from `z` by a random word.
pub fn check_quotient_bracket(
    e: &CharacteristicDistribution,
    f: &SmoothMap,
    g: &SmoothMap,
    probes: &Probes,
    sampler: &WordSampler,
    tol: f64,
) -> Result<CheckReport> {
    let chart = e.base.chart().clone();
    let mut report = CheckReport::new("quotient_bracket.lift", tol);
    let mut rng = probes.rng();
    for _ in 0..probes.count {
        let Some((z, end, _)) = related_pair(e, &mut rng, sampler) else {
            continue;
        };
        let a = quotient_bracket(e, f, g, &chart.point(z)?)?;
        let b = quotient_bracket(e, f, g, &chart.point(end)?)?;
        report.record((a - b).abs() / a.abs().max(1.0));
    }
    Ok(report)
}

/// Every label component is constant along every spanning field.
pub fn check_signature_conserved(
    e: &CharacteristicDistribution,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    let points = probes.points(e.base.chart());
    let mut report = CheckReport::new("signature.conserved", tol);
    for q in &e.labels()?.components {
        report.record(max_leaf_derivative(&e.base, q, &points)?);
    }
    report.probes = points.len();
    Ok(report)
}

/// Label drift along random words.
pub fn check_label_flow_invariance(
    e: &CharacteristicDistribution,
    probes: &Probes,
    sampler: &WordSampler,
    tol: f64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("label.flow_invariant", tol);
    let mut rng = probes.rng();
    for _ in 0..probes.count {
        let Some((z, end, _)) = related_pair(e, &mut rng, sampler) else {
            continue;
        };
        report.record(label_distance(e, &label_at(e, &z)?, &label_at(e, &end)?)?);
    }
    Ok(report)
}

/// Points reached by flow words share the isotropy class of the start.
/// Residual is 1 for a class change, 0 otherwise.
pub fn check_isotropy_along_words(
    e: &CharacteristicDistribution,
    points: &[Vector],
    sampler: &WordSampler,
    seed: u64,
) -> CheckReport {
    let mut report = CheckReport::new("isotropy.along_words", 0.0);
    let mut rng = Probes::new(0, seed).rng();
    for z in points {
        let w = sampler.sample(&e.base, &mut rng);
        if let Ok((end, _)) = apply_flow_word_recorded(&e.base, &w, z, &StepControl::default()) {
            let same = isotropy_at(&e.action, z).class_id == isotropy_at(&e.action, &end).class_id;
            report.record(if same { 0.0 } else { 1.0 });
        }
    }
    report
}

/// `E` is a Poisson distribution: for `f, g` built from label components
/// (so `df|_E = dg|_E = 0`), `d{f, g}` also annihilates `E`.
pub fn check_poisson_distribution(
    e: &CharacteristicDistribution,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    let spec = e.labels()?;
    let k = spec.len();
    let n = e.base.chart().dim();
    let mut report = CheckReport::new("distribution.poisson", tol);
    if k == 0 {
        report.record(0.0);
        return Ok(report);
    }
    let mut rng = probes.rng();
    let c = spec.component_map(n);
    for z in probes.points(e.base.chart()) {
        let (f, g) = (random_quadratic(k, &mut rng), random_quadratic(k, &mut rng));
        let (fp, gp) = (f.compose(&c), g.compose(&c));
        let bracket = |x: &Vector| {
            Vector::from_element(1, bracket_at(&e.poisson, &fp, &gp, x).unwrap_or(f64::NAN))
        };
        let d = fd_jacobian(bracket, &z, 1).row(0).transpose();
        let mut worst: f64 = 0.0;
        for sf in e.base.family() {
            let x = sf.field.eval(&z);
            worst = worst.max(d.dot(&x).abs() / (d.norm() * x.norm()).max(1.0));
        }
        report.record(worst);
    }
    Ok(report)
}

/// `Σ a_i y_i + Σ b_ij y_i y_j` with random coefficients and exact gradient.
pub fn random_quadratic<R: rand::Rng>(k: usize, rng: &mut R) -> SmoothMap {
    let a = Vector::from_iterator(k, (0..k).map(|_| rng.random_range(-1.0..1.0)));
    let b = Matrix::from_iterator(k, k, (0..k * k).map(|_| rng.random_range(-1.0..1.0)));
    let s = (&b + b.transpose()) * 0.5;
    let (a2, s2) = (a.clone(), s.clone());
    SmoothMap::scalar("q", k, move |y| a.dot(y) + y.dot(&(&s * y)))
        .with_gradient(move |y| &a2 + &s2 * y * 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cone_signature_canonical_and_phase_free() {
        let pairs = vec![(0, 1), (2, 3)];
        let z = Vector::from_vec(vec![0.0, 0.0, 0.0, 2.0]);
        let Signature::Cone {
            representative,
            radius,
        } = cone_signature(&z, &pairs)
        else {
            panic!()
        };
        assert!((radius - 2.0).abs() < 1e-15);
        assert!((representative[1] - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(cone_signature(&Vector::zeros(4), &pairs), Signature::Apex);
        let u = vec![c(0.6, 0.0), c(0.0, 0.8)];
        let phase = c(0.3f64.cos(), 0.3f64.sin());
        let v: Vec<Complex64> = u.iter().map(|x| x * phase).collect();
        assert!(phase_distance(&u, &v) < 1e-15);
        assert!(phase_distance(&u, &[c(1.0, 0.0), c(0.0, 0.0)]) > 0.1);
    }

    #[test]
    fn periodic_component_distance() {
        let spec = LabelSpec::components(vec![ConservedQuantity::periodic(
            SmoothMap::scalar("t", 1, |z| z[0]),
            2.0 * std::f64::consts::PI,
        )]);
        let a = Signature::Values(vec![0.05]);
        let b = Signature::Values(vec![2.0 * std::f64::consts::PI - 0.05]);
        assert!((a.distance(&b, &spec) - 0.1).abs() < 1e-12);
    }
}
