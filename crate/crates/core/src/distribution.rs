//! Generalized distributions spanned by families of vector fields, flow
//! words of the generated pseudogroup, and orbit reachability.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Subspace, Vector};
use crate::ode::{self, StepControl};
use crate::phase_space::{Chart, PhasePoint, Probes, SmoothMap};
use crate::report::CheckReport;
use crate::tolerances::TOL_REACH;

pub type Domain = Arc<dyn Fn(&Vector) -> bool + Send + Sync>;

/// One member of a spanning family: a vector field and the open set where it
/// is defined (everywhere when `domain` is `None`).
#[derive(Clone)]
pub struct SpanningField {
    pub field: SmoothMap,
    pub domain: Option<Domain>,
}

impl SpanningField {
    pub fn contains(&self, z: &Vector) -> bool {
        self.domain.as_ref().is_none_or(|d| d(z))
    }
}

impl fmt::Debug for SpanningField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpanningField({})", self.field.name())
    }
}

/// `D_z = span{X(z) : X in the family, z in dom X}`.
#[derive(Clone, Debug)]
pub struct GeneralizedDistribution {
    chart: Arc<Chart>,
    family: Vec<SpanningField>,
}

/// Rank of a distribution at a point with an orthonormal basis of the fiber.
#[derive(Clone, Debug, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    pub basis: Subspace,
}

impl GeneralizedDistribution {
    pub fn new(chart: Arc<Chart>) -> Self {
        Self {
            chart,
            family: Vec::new(),
        }
    }

    pub fn push(&mut self, field: SmoothMap, domain: Option<Domain>) -> Result<()> {
        let n = self.chart.dim();
        if field.input_dim() != n || field.output_dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: field.output_dim(),
            });
        }
        if field.name().contains(['@', ';']) || field.name().trim().is_empty() {
            return Err(Error::Validation(format!(
                "field name `{}` cannot appear in a flow word",
                field.name()
            )));
        }
        if self.family.iter().any(|f| f.field.name() == field.name()) {
            return Err(Error::Validation(format!(
                "duplicate field name `{}`",
                field.name()
            )));
        }
        self.family.push(SpanningField { field, domain });
        Ok(())
    }

    pub fn with_field(mut self, field: SmoothMap) -> Result<Self> {
        self.push(field, None)?;
        Ok(self)
    }

    pub fn with_field_on(mut self, field: SmoothMap, domain: Domain) -> Result<Self> {
        self.push(field, Some(domain))?;
        Ok(self)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn family(&self) -> &[SpanningField] {
        &self.family
    }

    pub fn len(&self) -> usize {
        self.family.len()
    }

    pub fn is_empty(&self) -> bool {
        self.family.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.family
            .iter()
            .position(|f| f.field.name() == name)
            .ok_or_else(|| Error::Unknown {
                kind: "field",
                name: name.to_string(),
            })
    }

    /// Same fields in another order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            chart: self.chart.clone(),
            family: order.iter().map(|&i| self.family[i].clone()).collect(),
        }
    }

    /// Columns are the values of the fields defined at `z`.
    pub fn values_at(&self, z: &Vector) -> Matrix {
        let cols: Vec<Vector> = self
            .family
            .iter()
            .filter(|f| f.contains(z))
            .map(|f| f.field.eval(z))
            .collect();
        crate::linalg::columns(self.chart.dim(), &cols)
    }

    pub fn fiber(&self, z: &Vector) -> Subspace {
        Subspace::span(&self.values_at(z))
    }

    pub fn rank_at(&self, z: &PhasePoint) -> Result<RankReport> {
        if z.chart_id() != self.chart.id() {
            return Err(Error::ChartMismatch {
                expected: self.chart.id().into(),
                found: z.chart_id().into(),
            });
        }
        let basis = self.fiber(z.coords());
        Ok(RankReport {
            rank: basis.dim(),
            basis,
        })
    }
}

/// One flow in a word: the flow of the named field for `time`.
#[derive(Clone, Debug, PartialEq)]
pub struct Letter {
    pub field: String,
    pub time: f64,
}

/// `ℱ_T = F¹_{t1} ∘ … ∘ F^k_{tk}`: the last letter is applied first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowWord {
    letters: Vec<Letter>,
}

impl FlowWord {
    pub fn new(letters: Vec<Letter>) -> Self {
        Self { letters }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Compose a flow after the current word.
    pub fn then(&mut self, field: impl Into<String>, time: f64) {
        self.letters.insert(
            0,
            Letter {
                field: field.into(),
                time,
            },
        );
    }

    /// `ℱ_T⁻¹ = F^k_{-tk} ∘ … ∘ F¹_{-t1}`.
    pub fn inverse(&self) -> Self {
        Self {
            letters: self
                .letters
                .iter()
                .rev()
                .map(|l| Letter {
                    field: l.field.clone(),
                    time: -l.time,
                })
                .collect(),
        }
    }

    /// Total absolute integration time.
    pub fn total_time(&self) -> f64 {
        self.letters.iter().map(|l| l.time.abs()).sum()
    }
}

impl fmt::Display for FlowWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, ";")?;
            }
            write!(f, "{}@{}", l.field, l.time)?;
        }
        Ok(())
    }
}

impl FromStr for FlowWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().is_empty() {
            return Ok(Self::empty());
        }
        let letters = s
            .split(';')
            .map(|part| {
                let (name, time) = part
                    .split_once('@')
                    .ok_or_else(|| Error::Parse(format!("flow letter `{part}` lacks `@time`")))?;
                let name = name.trim();
                if name.is_empty() {
                    return Err(Error::Parse(format!(
                        "flow letter `{part}` has no field name"
                    )));
                }
                let time: f64 = time
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad time in flow letter `{part}`")))?;
                if !time.is_finite() {
                    return Err(Error::Parse(format!(
                        "non-finite time in flow letter `{part}`"
                    )));
                }
                Ok(Letter {
                    field: name.to_string(),
                    time,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { letters })
    }
}

/// Step sequences recorded per letter, in application order.
pub type StepRecord = Vec<Vec<f64>>;

fn flow_letter(
    d: &GeneralizedDistribution,
    index: usize,
    letter_pos: usize,
    z: &Vector,
    t: f64,
    ctrl: &StepControl,
) -> Result<ode::Trajectory> {
    let sf = &d.family[index];
    let chart = d.chart.clone();
    let inside = |x: &Vector| sf.contains(&chart.wrap(x));
    let wrap = |e: Error| Error::PartialComposition {
        letter: letter_pos,
        field: sf.field.name().to_string(),
        source: Box::new(e),
    };
    if !inside(z) {
        return Err(wrap(Error::DomainEscape { t: 0.0 }));
    }
    let f = |x: &Vector| sf.field.eval(x);
    let mut tr = ode::integrate(&f, z, t, ctrl, Some(&inside)).map_err(wrap)?;
    tr.end = d.chart.wrap(&tr.end);
    Ok(tr)
}

/// Evaluate the composite diffeomorphism of `w` at raw chart coordinates,
/// recording the step sequence of each letter.
pub fn apply_flow_word_recorded(
    d: &GeneralizedDistribution,
    w: &FlowWord,
    z: &Vector,
    ctrl: &StepControl,
) -> Result<(Vector, StepRecord)> {
    let mut state = d.chart.wrap(z);
    let mut record = Vec::with_capacity(w.len());
    for (pos, letter) in w.letters.iter().enumerate().rev() {
        let idx = d.index_of(&letter.field)?;
        let tr = flow_letter(d, idx, pos, &state, letter.time, ctrl)?;
        state = tr.end;
        record.push(tr.steps);
    }
    Ok((state, record))
}

pub fn apply_flow_word(
    d: &GeneralizedDistribution,
    w: &FlowWord,
    z: &PhasePoint,
) -> Result<PhasePoint> {
    if z.chart_id() != d.chart.id() {
        return Err(Error::ChartMismatch {
            expected: d.chart.id().into(),
            found: z.chart_id().into(),
        });
    }
    let (end, _) = apply_flow_word_recorded(d, w, z.coords(), &StepControl::default())?;
    PhasePoint::new(d.chart.clone(), end)
}

/// Re-run a word with recorded steps. The result is a smooth function of
/// `z`, so it can be differentiated numerically.
pub fn replay_flow_word(
    d: &GeneralizedDistribution,
    w: &FlowWord,
    z: &Vector,
    record: &StepRecord,
) -> Result<Vector> {
    let mut state = z.clone();
    for (letter, steps) in w.letters.iter().rev().zip(record) {
        let sf = &d.family[d.index_of(&letter.field)?];
        let f = |x: &Vector| sf.field.eval(x);
        state = ode::replay(&f, &state, steps);
    }
    Ok(state)
}

/// Central-difference Jacobian of a word's composite map at `z`, with step
/// `1e-6 · max(1, |z_i|)` on the replayed map.
pub fn flow_word_jacobian(
    d: &GeneralizedDistribution,
    w: &FlowWord,
    z: &Vector,
    record: &StepRecord,
) -> Result<Matrix> {
    let n = z.len();
    let mut jac = Matrix::zeros(n, n);
    let mut zp = z.clone();
    for i in 0..n {
        let h = 1e-6 * z[i].abs().max(1.0);
        zp[i] = z[i] + h;
        let fp = replay_flow_word(d, w, &zp, record)?;
        zp[i] = z[i] - h;
        let fm = replay_flow_word(d, w, &zp, record)?;
        zp[i] = z[i];
        jac.set_column(i, &(d.chart.difference(&fp, &fm) / (2.0 * h)));
    }
    Ok(jac)
}

/// Shape of random flow words.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WordSampler {
    pub max_letters: usize,
    pub max_time: f64,
}

impl Default for WordSampler {
    fn default() -> Self {
        Self {
            max_letters: 3,
            max_time: 1.0,
        }
    }
}

impl WordSampler {
    pub fn sample<R: Rng + ?Sized>(&self, d: &GeneralizedDistribution, rng: &mut R) -> FlowWord {
        if d.is_empty() {
            return FlowWord::empty();
        }
        let k = rng.random_range(1..=self.max_letters.max(1));
        FlowWord::new(
            (0..k)
                .map(|_| Letter {
                    field: d.family[rng.random_range(0..d.len())]
                        .field
                        .name()
                        .to_string(),
                    time: rng.random_range(-self.max_time..self.max_time),
                })
                .collect(),
        )
    }
}

/// Push `D_z` through the Jacobian of random flow words and compare with
/// `D` at the image by the largest principal angle. Probes where a word
/// leaves a field's domain are skipped and counted in the detail line.
pub fn check_involutivity(
    d: &GeneralizedDistribution,
    probes: &Probes,
    sampler: &WordSampler,
    tol: f64,
) -> CheckReport {
    let mut report = CheckReport::new("distribution.involutive", tol);
    let mut rng = probes.rng();
    let mut skipped = 0;
    let ctrl = StepControl::default();
    for _ in 0..probes.count {
        let z = d.chart.sample(&mut rng);
        let w = sampler.sample(d, &mut rng);
        let outcome = apply_flow_word_recorded(d, &w, &z, &ctrl)
            .and_then(|(end, record)| Ok((end, flow_word_jacobian(d, &w, &z, &record)?)));
        match outcome {
            Ok((end, jac)) => {
                let pushed = d.fiber(&z).image(&jac);
                report.record(pushed.max_angle(&d.fiber(&end)));
            }
            Err(_) => skipped += 1,
        }
    }
    if skipped > 0 {
        report.note(format!(
            "{skipped} probes skipped after leaving a field domain"
        ));
    }
    report
}

/// A smooth function expected to be constant on leaves; values are compared
/// modulo `period` when one is given.
#[derive(Clone, Debug)]
pub struct ConservedQuantity {
    pub map: SmoothMap,
    pub period: Option<f64>,
}

impl ConservedQuantity {
    pub fn new(map: SmoothMap) -> Self {
        Self { map, period: None }
    }

    pub fn periodic(map: SmoothMap, period: f64) -> Self {
        Self {
            map,
            period: Some(period),
        }
    }

    pub fn name(&self) -> &str {
        self.map.name()
    }

    pub fn value(&self, z: &Vector) -> f64 {
        let v = self.map.value(z);
        match self.period {
            Some(p) => v.rem_euclid(p),
            None => v,
        }
    }

    /// Signed difference `a - b`, reduced to `[-p/2, p/2)` when periodic.
    pub fn difference(&self, a: f64, b: f64) -> f64 {
        let d = a - b;
        match self.period {
            Some(p) => (d + 0.5 * p).rem_euclid(p) - 0.5 * p,
            None => d,
        }
    }
}

/// Largest `|dI(z)·X(z)|` over the family at the given points, relative to
/// `max(1, |dI| |X|)`.
pub fn max_leaf_derivative(
    d: &GeneralizedDistribution,
    q: &ConservedQuantity,
    points: &[Vector],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for z in points {
        let grad = q.map.gradient(z)?;
        for f in d.family.iter().filter(|f| f.contains(z)) {
            let x = f.field.eval(z);
            worst = worst.max(grad.dot(&x).abs() / (grad.norm() * x.norm()).max(1.0));
        }
    }
    Ok(worst)
}

/// A conserved quantity that separates two points.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub name: String,
    pub at_a: f64,
    pub at_b: f64,
    /// Certified bound on `|dI·X|` over the family at the probes.
    pub max_derivative: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OrbitAnswer {
    Yes(FlowWord),
    No(Witness),
    Unknown { spent: f64, best_distance: f64 },
}

/// Parameters of [`same_orbit`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitSearch {
    /// Total absolute integration time available for steering.
    pub budget: f64,
    pub tol_reach: f64,
    pub restarts: usize,
    pub seed: u64,
    pub witness_probes: usize,
    pub witness_tol: f64,
    /// Largest time of a single steering letter.
    pub max_letter_time: f64,
}

impl Default for OrbitSearch {
    fn default() -> Self {
        Self {
            budget: 100.0,
            tol_reach: TOL_REACH,
            restarts: 8,
            seed: 0,
            witness_probes: 100,
            witness_tol: 1e-8,
            max_letter_time: 10.0,
        }
    }
}

const MAX_STEERING_ROUNDS: usize = 2000;

fn find_witness(
    d: &GeneralizedDistribution,
    a: &Vector,
    b: &Vector,
    invariants: &[ConservedQuantity],
    search: &OrbitSearch,
) -> Result<Option<Witness>> {
    for q in invariants {
        let (va, vb) = (q.value(a), q.value(b));
        let sep = search.tol_reach * va.abs().max(vb.abs()).max(1.0);
        if q.difference(va, vb).abs() <= sep {
            continue;
        }
        let mut points = Probes::new(search.witness_probes, search.seed).points(&d.chart);
        points.push(a.clone());
        points.push(b.clone());
        let bound = max_leaf_derivative(d, q, &points)?;
        if bound <= search.witness_tol {
            return Ok(Some(Witness {
                name: q.name().to_string(),
                at_a: va,
                at_b: vb,
                max_derivative: bound,
            }));
        }
    }
    Ok(None)
}

/// Decide whether `a` and `b` lie on the same orbit of the pseudogroup.
///
/// `No` needs a supplied quantity that separates the points and is certified
/// constant along every spanning field at probes. `Yes` comes from greedy
/// steering: each round tries, for every field, the linearized time
/// `⟨X, b - s⟩ / |X|²` (halved until the distance drops) and keeps the best;
/// stalls trigger a random letter. The resulting word is verified by a fresh
/// replay from `a`.
pub fn same_orbit(
    d: &GeneralizedDistribution,
    a: &PhasePoint,
    b: &PhasePoint,
    invariants: &[ConservedQuantity],
    search: &OrbitSearch,
) -> Result<OrbitAnswer> {
    for p in [a, b] {
        if p.chart_id() != d.chart.id() {
            return Err(Error::ChartMismatch {
                expected: d.chart.id().into(),
                found: p.chart_id().into(),
            });
        }
    }
    let chart = d.chart.clone();
    let (za, zb) = (a.coords().clone(), b.coords().clone());
    let scale = zb.amax().max(1.0);
    let dist = |x: &Vector| chart.distance(x, &zb) / scale;
    if dist(&za) <= search.tol_reach {
        return Ok(OrbitAnswer::Yes(FlowWord::empty()));
    }
    if let Some(w) = find_witness(d, &za, &zb, invariants, search)? {
        return Ok(OrbitAnswer::No(w));
    }
    let ctrl = StepControl::default();
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let mut state = za.clone();
    let mut current = dist(&state);
    let mut best = current;
    let mut word = FlowWord::empty();
    let mut spent = 0.0;
    let mut restarts = search.restarts;
    for _ in 0..MAX_STEERING_ROUNDS {
        if current <= 0.5 * search.tol_reach {
            break;
        }
        let remaining = search.budget - spent;
        if remaining <= 0.0 {
            break;
        }
        let residual = chart.difference(&zb, &state);
        let mut chosen: Option<(f64, usize, f64, Vector)> = None;
        for (i, sf) in d.family.iter().enumerate() {
            if !sf.contains(&state) {
                continue;
            }
            let x = sf.field.eval(&state);
            let nx2 = x.norm_squared();
            if nx2 < 1e-24 {
                continue;
            }
            let mut tau =
                (x.dot(&residual) / nx2).clamp(-search.max_letter_time, search.max_letter_time);
            tau = tau.clamp(-remaining, remaining);
            for _ in 0..30 {
                if tau == 0.0 {
                    break;
                }
                if let Ok(tr) = flow_letter(d, i, 0, &state, tau, &ctrl) {
                    let dn = dist(&tr.end);
                    if dn < current {
                        if chosen.as_ref().is_none_or(|c| dn < c.0) {
                            chosen = Some((dn, i, tau, tr.end));
                        }
                        break;
                    }
                }
                tau *= 0.5;
            }
        }
        match chosen {
            Some((dn, i, tau, end)) if dn < 0.999 * current => {
                word.then(d.family[i].field.name(), tau);
                spent += tau.abs();
                state = end;
                current = dn;
            }
            _ => {
                if restarts == 0 || d.is_empty() {
                    break;
                }
                restarts -= 1;
                let i = rng.random_range(0..d.len());
                let tau = rng.random_range(-1.0..1.0);
                if let Ok(tr) = flow_letter(d, i, 0, &state, tau, &ctrl) {
                    word.then(d.family[i].field.name(), tau);
                    spent += tau.abs();
                    state = tr.end;
                    current = dist(&state);
                }
            }
        }
        best = best.min(current);
    }
    if current <= search.tol_reach {
        let replayed = apply_flow_word(d, &word, a)?;
        if dist(replayed.coords()) <= search.tol_reach {
            return Ok(OrbitAnswer::Yes(word));
        }
    }
    Ok(OrbitAnswer::Unknown {
        spent,
        best_distance: best,
    })
}
