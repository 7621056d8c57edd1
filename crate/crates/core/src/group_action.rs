//! Canonical group actions on charts, isotropy, classical momentum maps, and
//! the fixed-point identities of linear representations.
//!
//! Four group models are supported, each chosen so that everything needed
//! later can be computed exactly or to rounding:
//!
//! * finite groups given by an explicit list of linear maps,
//! * tori acting on complex coordinate pairs through integer weights,
//! * matrix Lie groups given by an algebra basis of the linear representation,
//! * translation groups (possibly periodic in their parameters).
//!
//! Finite groups and tori are the "compact" models: their averaging
//! projectors are exact (enumeration, or trigonometric quadrature on a grid
//! finer than the largest weight).

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, null_space, Matrix, Subspace, Vector, RANK_REL_TOL};
use crate::ode::{self, StepControl};
use crate::phase_space::{
    chart_jacobian, hamiltonian_vector_field, Chart, PhasePoint, PoissonStructure, Probes,
    SmoothMap, StructureKind,
};
use crate::report::CheckReport;

#[derive(Clone, Debug)]
pub enum GroupModel {
    /// Explicit element list of linear maps; element 0 is the identity.
    Finite { elements: Vec<Matrix> },
    /// `θ · (x_k + i y_k) = e^{i Σ_j w_kj θ_j} (x_k + i y_k)` on coordinate
    /// pairs `(x_k, y_k)`; coordinates outside every pair are fixed.
    Torus {
        pairs: Vec<(usize, usize)>,
        weights: Vec<Vec<i64>>,
        rank: usize,
    },
    /// Linear action `z ↦ exp(Σ c_i A_i) z`.
    MatrixLie { basis: Vec<Matrix> },
    /// `λ · z = z + D λ`, with optional periods on the parameters.
    Translation {
        directions: Matrix,
        periods: Vec<Option<f64>>,
    },
}

/// An element of one of the group models.
#[derive(Clone, Debug, PartialEq)]
pub enum GroupElement {
    Index(usize),
    Params(Vector),
    Matrix(Matrix),
}

/// A group acting on a chart, together with the infinitesimal generators
/// of a chosen Lie algebra basis.
#[derive(Clone)]
pub struct GroupAction {
    name: String,
    chart: Arc<Chart>,
    model: GroupModel,
    table: Vec<Vec<usize>>,
    generators: Vec<Matrix>,
    proper: bool,
    sample_scale: f64,
}

impl fmt::Debug for GroupAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupAction")
            .field("name", &self.name)
            .field("chart", &self.chart.id())
            .field("algebra_dim", &self.algebra_dim())
            .finish()
    }
}

fn rotation_generator(n: usize, pairs: &[(usize, usize)], weights: &[i64]) -> Matrix {
    let mut a = Matrix::zeros(n, n);
    for (&(x, y), &w) in pairs.iter().zip(weights) {
        let w = w as f64;
        // (x, y) ↦ w (-y, x): multiplication by i w
        a[(x, y)] = -w;
        a[(y, x)] = w;
    }
    a
}

fn find_element(elements: &[Matrix], m: &Matrix) -> Option<usize> {
    elements.iter().position(|e| max_abs(&(e - m)) < 1e-9)
}

impl GroupAction {
    pub fn finite(
        name: impl Into<String>,
        chart: Arc<Chart>,
        elements: Vec<Matrix>,
    ) -> Result<Self> {
        let n = chart.dim();
        let id = Matrix::identity(n, n);
        let mut elements = elements;
        let pos = find_element(&elements, &id).ok_or_else(|| {
            Error::Validation("finite group element list lacks the identity".into())
        })?;
        elements.swap(0, pos);
        let mut table = vec![vec![0; elements.len()]; elements.len()];
        for (i, a) in elements.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: a.nrows(),
                });
            }
            for (j, b) in elements.iter().enumerate() {
                table[i][j] = find_element(&elements, &(a * b)).ok_or_else(|| {
                    Error::Validation("finite element list is not closed under products".into())
                })?;
            }
        }
        Ok(Self {
            name: name.into(),
            chart,
            model: GroupModel::Finite { elements },
            table,
            generators: Vec::new(),
            proper: true,
            sample_scale: 1.0,
        })
    }

    pub fn torus(
        name: impl Into<String>,
        chart: Arc<Chart>,
        pairs: Vec<(usize, usize)>,
        weights: Vec<Vec<i64>>,
    ) -> Result<Self> {
        let n = chart.dim();
        if pairs.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: pairs.len(),
                found: weights.len(),
            });
        }
        let rank = weights.first().map_or(0, Vec::len);
        if weights.iter().any(|w| w.len() != rank) {
            return Err(Error::Validation(
                "torus weight rows have unequal length".into(),
            ));
        }
        if pairs.iter().any(|&(x, y)| x >= n || y >= n || x == y) {
            return Err(Error::Validation("torus pair indices out of range".into()));
        }
        let generators = (0..rank)
            .map(|j| {
                let col: Vec<i64> = weights.iter().map(|w| w[j]).collect();
                rotation_generator(n, &pairs, &col)
            })
            .collect();
        Ok(Self {
            name: name.into(),
            chart,
            model: GroupModel::Torus {
                pairs,
                weights,
                rank,
            },
            table: Vec::new(),
            generators,
            proper: true,
            sample_scale: std::f64::consts::PI,
        })
    }

    pub fn matrix_lie(
        name: impl Into<String>,
        chart: Arc<Chart>,
        basis: Vec<Matrix>,
    ) -> Result<Self> {
        let n = chart.dim();
        if let Some(bad) = basis.iter().find(|a| a.shape() != (n, n)) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.nrows(),
            });
        }
        Ok(Self {
            name: name.into(),
            chart,
            generators: basis.clone(),
            model: GroupModel::MatrixLie { basis },
            table: Vec::new(),
            proper: true,
            sample_scale: 1.0,
        })
    }

    pub fn translation(
        name: impl Into<String>,
        chart: Arc<Chart>,
        directions: Matrix,
        periods: Vec<Option<f64>>,
    ) -> Result<Self> {
        if directions.nrows() != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: directions.nrows(),
            });
        }
        if periods.len() != directions.ncols() {
            return Err(Error::DimensionMismatch {
                expected: directions.ncols(),
                found: periods.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            chart,
            model: GroupModel::Translation {
                directions,
                periods,
            },
            table: Vec::new(),
            generators: Vec::new(),
            proper: true,
            sample_scale: 1.0,
        })
    }

    /// Record whether the scenario asserts the action is proper.
    pub fn proper(mut self, proper: bool) -> Self {
        self.proper = proper;
        self
    }

    /// Scale of random algebra coefficients when sampling elements.
    pub fn sample_scale(mut self, scale: f64) -> Self {
        self.sample_scale = scale;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn model(&self) -> &GroupModel {
        &self.model
    }

    pub fn is_proper(&self) -> bool {
        self.proper
    }

    pub fn algebra_dim(&self) -> usize {
        match &self.model {
            GroupModel::Finite { .. } => 0,
            GroupModel::Torus { rank, .. } => *rank,
            GroupModel::MatrixLie { basis } => basis.len(),
            GroupModel::Translation { directions, .. } => directions.ncols(),
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self.model, GroupModel::Translation { .. })
    }

    pub fn is_abelian(&self) -> bool {
        match &self.model {
            GroupModel::Finite { .. } => (0..self.table.len())
                .all(|i| (0..self.table.len()).all(|j| self.table[i][j] == self.table[j][i])),
            GroupModel::Torus { .. } | GroupModel::Translation { .. } => true,
            GroupModel::MatrixLie { basis } => basis
                .iter()
                .all(|a| basis.iter().all(|b| max_abs(&(a * b - b * a)) < 1e-12)),
        }
    }

    pub fn finite_order(&self) -> Option<usize> {
        match &self.model {
            GroupModel::Finite { elements } => Some(elements.len()),
            _ => None,
        }
    }

    pub fn identity(&self) -> GroupElement {
        match &self.model {
            GroupModel::Finite { .. } => GroupElement::Index(0),
            GroupModel::Torus { rank, .. } => GroupElement::Params(Vector::zeros(*rank)),
            GroupModel::Translation { directions, .. } => {
                GroupElement::Params(Vector::zeros(directions.ncols()))
            }
            GroupModel::MatrixLie { .. } => {
                let n = self.chart.dim();
                GroupElement::Matrix(Matrix::identity(n, n))
            }
        }
    }

    fn wrap_params(&self, p: Vector) -> Vector {
        match &self.model {
            GroupModel::Torus { .. } => p.map(|x| x.rem_euclid(2.0 * std::f64::consts::PI)),
            GroupModel::Translation { periods, .. } => Vector::from_iterator(
                p.len(),
                p.iter().zip(periods).map(|(&x, per)| match per {
                    Some(per) => x.rem_euclid(*per),
                    None => x,
                }),
            ),
            _ => p,
        }
    }

    /// Group product `g h`.
    pub fn compose(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        match (g, h) {
            (GroupElement::Index(i), GroupElement::Index(j)) => {
                GroupElement::Index(self.table[*i][*j])
            }
            (GroupElement::Params(a), GroupElement::Params(b)) => {
                GroupElement::Params(self.wrap_params(a + b))
            }
            (GroupElement::Matrix(a), GroupElement::Matrix(b)) => GroupElement::Matrix(a * b),
            _ => panic!("mixed group element kinds"),
        }
    }

    pub fn inverse(&self, g: &GroupElement) -> GroupElement {
        match g {
            GroupElement::Index(i) => {
                GroupElement::Index(self.table[*i].iter().position(|&k| k == 0).expect("group"))
            }
            GroupElement::Params(a) => GroupElement::Params(self.wrap_params(-a)),
            GroupElement::Matrix(a) => {
                GroupElement::Matrix(a.clone().try_inverse().expect("invertible group element"))
            }
        }
    }

    /// `exp(Σ c_i ξ_i)`.
    pub fn exp(&self, coeffs: &Vector) -> GroupElement {
        assert_eq!(
            coeffs.len(),
            self.algebra_dim(),
            "algebra coefficient length"
        );
        match &self.model {
            GroupModel::Finite { .. } => GroupElement::Index(0),
            GroupModel::Torus { .. } | GroupModel::Translation { .. } => {
                GroupElement::Params(self.wrap_params(coeffs.clone()))
            }
            GroupModel::MatrixLie { basis } => {
                let n = self.chart.dim();
                let mut a = Matrix::zeros(n, n);
                for (c, b) in coeffs.iter().zip(basis) {
                    a += b * *c;
                }
                GroupElement::Matrix(a.exp())
            }
        }
    }

    /// Matrix of the element in a linear model.
    pub fn linear_map(&self, g: &GroupElement) -> Option<Matrix> {
        let n = self.chart.dim();
        match (&self.model, g) {
            (GroupModel::Finite { elements }, GroupElement::Index(i)) => Some(elements[*i].clone()),
            (GroupModel::MatrixLie { .. }, GroupElement::Matrix(m)) => Some(m.clone()),
            (GroupModel::Torus { pairs, weights, .. }, GroupElement::Params(theta)) => {
                let mut m = Matrix::identity(n, n);
                for (&(x, y), w) in pairs.iter().zip(weights) {
                    let phi: f64 = w
                        .iter()
                        .zip(theta.iter())
                        .map(|(&wj, &t)| wj as f64 * t)
                        .sum();
                    let (s, c) = phi.sin_cos();
                    m[(x, x)] = c;
                    m[(x, y)] = -s;
                    m[(y, x)] = s;
                    m[(y, y)] = c;
                }
                Some(m)
            }
            _ => None,
        }
    }

    /// Raw action on chart coordinates, periodic coordinates wrapped.
    pub fn act(&self, g: &GroupElement, z: &Vector) -> Vector {
        match (&self.model, g) {
            (GroupModel::Translation { directions, .. }, GroupElement::Params(l)) => {
                self.chart.wrap(&(z + directions * l))
            }
            _ => {
                let m = self.linear_map(g).expect("linear model element");
                self.chart.wrap(&(m * z))
            }
        }
    }

    pub fn act_point(&self, g: &GroupElement, z: &PhasePoint) -> Result<PhasePoint> {
        if z.chart_id() != self.chart.id() {
            return Err(Error::ChartMismatch {
                expected: self.chart.id().into(),
                found: z.chart_id().into(),
            });
        }
        PhasePoint::new(self.chart.clone(), self.act(g, z.coords()))
    }

    /// `T_z Φ_g`.
    pub fn tangent_map(&self, g: &GroupElement, z: &Vector) -> Matrix {
        let n = self.chart.dim();
        match &self.model {
            GroupModel::Translation { .. } => Matrix::identity(n, n),
            _ => self
                .linear_map(g)
                .unwrap_or_else(|| chart_jacobian(|x| self.act(g, x), z, &self.chart)),
        }
    }

    /// Columns `ξ_{i,M}(z)` for the algebra basis.
    pub fn generators_at(&self, z: &Vector) -> Matrix {
        let n = self.chart.dim();
        match &self.model {
            GroupModel::Translation { directions, .. } => directions.clone(),
            GroupModel::Finite { .. } => Matrix::zeros(n, 0),
            _ => {
                let mut m = Matrix::zeros(n, self.generators.len());
                for (i, a) in self.generators.iter().enumerate() {
                    m.set_column(i, &(a * z));
                }
                m
            }
        }
    }

    /// Jacobian of `ξ_{i,M}` at `z`: the linearized infinitesimal action.
    pub fn generator_jacobian(&self, i: usize, _z: &Vector) -> Matrix {
        let n = self.chart.dim();
        match &self.model {
            GroupModel::Translation { .. } | GroupModel::Finite { .. } => Matrix::zeros(n, n),
            _ => self.generators[i].clone(),
        }
    }

    /// Linear combination `Σ c_i A_i` of generator Jacobians.
    pub fn algebra_operator(&self, coeffs: &Vector, z: &Vector) -> Matrix {
        let n = self.chart.dim();
        let mut a = Matrix::zeros(n, n);
        for (i, c) in coeffs.iter().enumerate() {
            a += self.generator_jacobian(i, z) * *c;
        }
        a
    }

    pub fn generator_field(&self, i: usize) -> SmoothMap {
        let n = self.chart.dim();
        let me = self.clone();
        let me2 = self.clone();
        SmoothMap::vector(format!("{}_gen{i}", self.name), n, n, move |z| {
            me.generators_at(z).column(i).into_owned()
        })
        .with_jacobian(move |z| me2.generator_jacobian(i, z))
    }

    /// Random element. Lie models use exponentials of random algebra
    /// combinations.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        match &self.model {
            GroupModel::Finite { elements } => {
                GroupElement::Index(rng.random_range(0..elements.len()))
            }
            GroupModel::Torus { rank, .. } => GroupElement::Params(Vector::from_iterator(
                *rank,
                (0..*rank).map(|_| rng.random_range(0.0..2.0 * std::f64::consts::PI)),
            )),
            GroupModel::Translation { periods, .. } => GroupElement::Params(Vector::from_iterator(
                periods.len(),
                periods.iter().map(|p| match p {
                    Some(p) => rng.random_range(0.0..*p),
                    None => rng.random_range(-self.sample_scale..self.sample_scale),
                }),
            )),
            GroupModel::MatrixLie { basis } => {
                let coeffs = Vector::from_iterator(
                    basis.len(),
                    (0..basis.len())
                        .map(|_| rng.sample::<f64, _>(StandardNormal) * self.sample_scale),
                );
                self.exp(&coeffs)
            }
        }
    }

    pub fn elements(&self) -> Vec<GroupElement> {
        match &self.model {
            GroupModel::Finite { elements } => {
                (0..elements.len()).map(GroupElement::Index).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Exact averaging projector `∫_G ρ(g) dg` for the compact models.
    pub fn averaging_projector(&self) -> Result<Matrix> {
        let n = self.chart.dim();
        match &self.model {
            GroupModel::Finite { elements } => {
                let mut p = Matrix::zeros(n, n);
                for e in elements {
                    p += e;
                }
                Ok(p / elements.len() as f64)
            }
            GroupModel::Torus { weights, rank, .. } => {
                // a grid of more than max|w| points per circle integrates every
                // character e^{i w θ} with w ≠ 0 to exactly zero
                let max_w = weights
                    .iter()
                    .flatten()
                    .map(|w| w.unsigned_abs())
                    .max()
                    .unwrap_or(0) as usize;
                let per_axis = max_w + 1;
                let total = per_axis.pow(*rank as u32);
                let mut p = Matrix::zeros(n, n);
                for idx in 0..total {
                    let mut rem = idx;
                    let theta = Vector::from_iterator(
                        *rank,
                        (0..*rank).map(|_| {
                            let k = rem % per_axis;
                            rem /= per_axis;
                            2.0 * std::f64::consts::PI * k as f64 / per_axis as f64
                        }),
                    );
                    p += self
                        .linear_map(&GroupElement::Params(theta))
                        .expect("torus element");
                }
                Ok(p / total as f64)
            }
            _ => Err(Error::Precondition(format!(
                "action `{}` has no exact averaging (finite or torus model required)",
                self.name
            ))),
        }
    }

    /// Coefficients of `Ad_{g⁻¹} ξ_i` in the algebra basis, as the rows of a
    /// `d x d` matrix.
    pub fn coadjoint_matrix(&self, g: &GroupElement) -> Matrix {
        let d = self.algebra_dim();
        match (&self.model, g) {
            (GroupModel::MatrixLie { basis }, GroupElement::Matrix(m)) if !self.is_abelian() => {
                let n = self.chart.dim();
                let inv = m.clone().try_inverse().expect("invertible");
                let mut stacked = Matrix::zeros(n * n, d);
                for (j, b) in basis.iter().enumerate() {
                    stacked.set_column(j, &Vector::from_column_slice(b.as_slice()));
                }
                let svd = stacked.svd(true, true);
                let mut out = Matrix::zeros(d, d);
                for (i, b) in basis.iter().enumerate() {
                    let conj = &inv * b * m;
                    let rhs = Vector::from_column_slice(conj.as_slice());
                    let c = svd.solve(&rhs, 1e-12).expect("least squares");
                    out.set_row(i, &c.transpose());
                }
                out
            }
            _ => Matrix::identity(d, d),
        }
    }
}

/// Check that a (tagged) map is invariant: `|f(g z) - f(z)|` over sampled
/// elements and points, relative to `max(1, |f(z)|)`.
pub fn validate_invariance(
    a: &GroupAction,
    f: &SmoothMap,
    probes: &Probes,
    tol: f64,
) -> CheckReport {
    let mut report = CheckReport::new(format!("invariance.{}", f.name()), tol);
    let mut rng = probes.rng();
    for _ in 0..probes.count {
        let z = a.chart().sample(&mut rng);
        let g = a.sample(&mut rng);
        let fz = f.eval(&z);
        let fgz = f.eval(&a.act(&g, &z));
        report.record((fgz - &fz).amax() / fz.amax().max(1.0));
    }
    report
}

/// `|df(z) · ξ_{i,M}(z)|` over probes and basis generators, relative to
/// `max(1, |df| |ξ_M|)`.
pub fn check_infinitesimal_invariance(
    a: &GroupAction,
    f: &SmoothMap,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new(format!("invariance.infinitesimal.{}", f.name()), tol);
    for z in probes.points(a.chart()) {
        let jac = f.jacobian(&z)?;
        let gens = a.generators_at(&z);
        let prod = &jac * &gens;
        let scale = (max_abs(&jac) * max_abs(&gens)).max(1.0);
        report.record(max_abs(&prod) / scale);
    }
    Ok(report)
}

/// Identity and composition residuals of the action on sampled triples.
pub fn check_action_axioms(a: &GroupAction, probes: &Probes, tol: f64) -> CheckReport {
    let mut report = CheckReport::new("action.axioms", tol);
    let mut rng = probes.rng();
    let chart = a.chart().clone();
    for _ in 0..probes.count {
        let z = chart.sample(&mut rng);
        let g = a.sample(&mut rng);
        let h = a.sample(&mut rng);
        let scale = z.amax().max(1.0);
        let e = chart.distance(&a.act(&a.identity(), &z), &chart.wrap(&z));
        let lhs = a.act(&g, &a.act(&h, &z));
        let rhs = a.act(&a.compose(&g, &h), &z);
        let inv = chart.distance(&a.act(&a.inverse(&g), &a.act(&g, &z)), &chart.wrap(&z));
        report.record(e.max(chart.distance(&lhs, &rhs)).max(inv) / scale);
    }
    report
}

/// Each generator agrees with `d/dt|₀ exp(t ξ_i) · z` by central differences.
pub fn check_generators(a: &GroupAction, probes: &Probes, tol: f64) -> CheckReport {
    let mut report = CheckReport::new("action.generators", tol);
    let mut rng = probes.rng();
    let chart = a.chart().clone();
    let d = a.algebra_dim();
    let h = 1e-5;
    for _ in 0..probes.count {
        let z = chart.sample(&mut rng);
        let gens = a.generators_at(&z);
        let mut worst: f64 = 0.0;
        for i in 0..d {
            let mut c = Vector::zeros(d);
            c[i] = h;
            let fwd = a.act(&a.exp(&c), &z);
            let back = a.act(&a.exp(&(-&c)), &z);
            let fd = chart.difference(&fwd, &back) / (2.0 * h);
            worst = worst.max((fd - gens.column(i)).amax() / gens.column(i).amax().max(1.0));
        }
        report.record(worst);
    }
    report
}

/// `Φ_g^*{f, h} = {Φ_g^* f, Φ_g^* h}`, checked in the equivalent tensor form
/// `TΦ_g(z) B(z) TΦ_g(z)ᵀ = B(g z)`.
pub fn is_canonical(
    a: &GroupAction,
    p: &PoissonStructure,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    if a.chart().id() != p.chart().id() {
        return Err(Error::ChartMismatch {
            expected: p.chart().id().into(),
            found: a.chart().id().into(),
        });
    }
    let mut report = CheckReport::new("action.canonical", tol);
    let mut rng = probes.rng();
    for _ in 0..probes.count {
        let z = a.chart().sample(&mut rng);
        let g = a.sample(&mut rng);
        let t = a.tangent_map(&g, &z);
        let lhs = &t * p.tensor(&z) * t.transpose();
        let rhs = p.tensor(&a.act(&g, &z));
        report.record(max_abs(&(lhs - &rhs)) / max_abs(&rhs).max(1.0));
    }
    Ok(report)
}

/// Isotropy data at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct IsotropyReport {
    pub point: Vector,
    /// Columns are algebra coefficient vectors spanning `𝔤_z`, orthonormal
    /// in the basis inner product.
    pub algebra_basis: Matrix,
    /// Stabilizer element indices (finite models only).
    pub finite_stabilizer: Vec<usize>,
    pub class_id: String,
}

impl IsotropyReport {
    pub fn algebra_dim(&self) -> usize {
        self.algebra_basis.ncols()
    }
}

fn element_order(a: &GroupAction, i: usize) -> usize {
    let g = GroupElement::Index(i);
    let mut acc = g.clone();
    let mut k = 1;
    while acc != GroupElement::Index(0) {
        acc = a.compose(&acc, &g);
        k += 1;
    }
    k
}

fn format_spectrum(values: &mut [f64]) -> String {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite spectrum"));
    let parts: Vec<String> = values
        .iter()
        .map(|v| {
            let r = (v * 1e6).round() / 1e6 + 0.0;
            format!("{r:.6}")
        })
        .collect();
    parts.join(",")
}

/// Stabilizer of `z`: the algebra kernel of `ξ ↦ ξ_M(z)` (singular values
/// below `1e-8 σ_max`), plus an exhaustive search for finite models.
///
/// The class identifier is the sorted element orders for finite stabilizers,
/// and `(dim 𝔤_z, spectrum of Σ A_i²)` over an orthonormal stabilizer basis
/// for Lie models. The latter is unchanged by conjugation when the basis is
/// orthonormal for an invariant inner product.
pub fn isotropy(a: &GroupAction, z: &PhasePoint) -> IsotropyReport {
    isotropy_at(a, z.coords())
}

pub fn isotropy_at(a: &GroupAction, z: &Vector) -> IsotropyReport {
    let chart = a.chart();
    match a.model() {
        GroupModel::Finite { elements } => {
            let scale = z.amax().max(1.0);
            let stab: Vec<usize> = (0..elements.len())
                .filter(|&i| chart.distance(&a.act(&GroupElement::Index(i), z), z) <= 1e-10 * scale)
                .collect();
            let mut orders: Vec<usize> = stab.iter().map(|&i| element_order(a, i)).collect();
            orders.sort_unstable();
            let list: Vec<String> = orders.iter().map(ToString::to_string).collect();
            IsotropyReport {
                point: z.clone(),
                algebra_basis: Matrix::zeros(0, 0),
                finite_stabilizer: stab,
                class_id: format!("finite[{}]", list.join(",")),
            }
        }
        _ => {
            let gens = a.generators_at(z);
            let d = a.algebra_dim();
            let kernel = if d == 0 {
                Matrix::zeros(0, 0)
            } else if max_abs(&gens) == 0.0 {
                Matrix::identity(d, d)
            } else {
                null_space(&gens, RANK_REL_TOL)
            };
            let n = chart.dim();
            let mut casimir = Matrix::zeros(n, n);
            for c in kernel.column_iter() {
                let op = a.algebra_operator(&c.into_owned(), z);
                casimir += &op * &op;
            }
            let sym = (&casimir + casimir.transpose()) * 0.5;
            let mut spectrum: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
            IsotropyReport {
                point: z.clone(),
                class_id: format!(
                    "lie:dim={};spec=[{}]",
                    kernel.ncols(),
                    format_spectrum(&mut spectrum)
                ),
                algebra_basis: kernel,
                finite_stabilizer: vec![0],
            }
        }
    }
}

/// Tangent vectors fixed by the isotropy representation at `z`:
/// `T_z M_H = { v : TΦ_h v = v for finite h ∈ G_z, A_η v = 0 for η ∈ 𝔤_z }`.
pub fn fixed_tangent(a: &GroupAction, iso: &IsotropyReport) -> Subspace {
    let z = &iso.point;
    let n = a.chart().dim();
    let mut rows: Vec<Matrix> = Vec::new();
    if a.finite_order().is_some() {
        for &i in &iso.finite_stabilizer {
            rows.push(a.tangent_map(&GroupElement::Index(i), z) - Matrix::identity(n, n));
        }
    }
    for c in iso.algebra_basis.column_iter() {
        rows.push(a.algebra_operator(&c.into_owned(), z));
    }
    kernel_of_stack(n, &rows)
}

/// Covectors fixed by the contragredient isotropy representation at `z`.
pub fn fixed_covectors(a: &GroupAction, iso: &IsotropyReport) -> Subspace {
    let z = &iso.point;
    let n = a.chart().dim();
    let mut rows: Vec<Matrix> = Vec::new();
    if a.finite_order().is_some() {
        for &i in &iso.finite_stabilizer {
            rows.push(
                (a.tangent_map(&GroupElement::Index(i), z) - Matrix::identity(n, n)).transpose(),
            );
        }
    }
    for c in iso.algebra_basis.column_iter() {
        rows.push(a.algebra_operator(&c.into_owned(), z).transpose());
    }
    kernel_of_stack(n, &rows)
}

fn kernel_of_stack(n: usize, blocks: &[Matrix]) -> Subspace {
    let total: usize = blocks.iter().map(Matrix::nrows).sum();
    if total == 0 {
        return Subspace::full(n);
    }
    let mut m = Matrix::zeros(total, n);
    let mut r = 0;
    for b in blocks {
        m.view_mut((r, 0), (b.nrows(), n)).copy_from(b);
        r += b.nrows();
    }
    if max_abs(&m) == 0.0 {
        return Subspace::full(n);
    }
    let k = null_space(&m, RANK_REL_TOL);
    Subspace::span(&k)
}

/// Tangent space to the group orbit at `z`.
pub fn orbit_tangent(a: &GroupAction, z: &Vector) -> Subspace {
    Subspace::span(&a.generators_at(z))
}

/// A validated classical momentum map, one scalar component per algebra
/// basis element.
#[derive(Clone, Debug)]
pub struct ClassicalMomentumMap {
    action: String,
    components: Vec<SmoothMap>,
}

impl ClassicalMomentumMap {
    pub fn action_name(&self) -> &str {
        &self.action
    }

    pub fn components(&self) -> &[SmoothMap] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn value(&self, z: &Vector) -> Vector {
        Vector::from_iterator(
            self.components.len(),
            self.components.iter().map(|c| c.value(z)),
        )
    }

    /// `d x n` Jacobian.
    pub fn jacobian(&self, z: &Vector) -> Result<Matrix> {
        let n = z.len();
        let mut m = Matrix::zeros(self.components.len(), n);
        for (i, c) in self.components.iter().enumerate() {
            m.set_row(i, &c.gradient(z)?.transpose());
        }
        Ok(m)
    }

    /// Everything is folded into one vector-valued map.
    pub fn as_map(&self, n: usize) -> SmoothMap {
        let me = self.clone();
        let me2 = self.clone();
        SmoothMap::vector("J", n, self.dim(), move |z| me.value(z))
            .with_jacobian(move |z| me2.jacobian(z).expect("momentum components differentiable"))
    }
}

/// Standard components `J^ξ(z) = ½ ω(ξ·z, z)` for a linear symplectic action.
/// With `B ω = -I` these satisfy `X_{J^ξ} = ξ_M`.
pub fn linear_momentum_components(a: &GroupAction, p: &PoissonStructure) -> Result<Vec<SmoothMap>> {
    if !a.is_linear() {
        return Err(Error::Precondition(
            "linear momentum formula needs a linear action".into(),
        ));
    }
    let omega = p.require_form(&Vector::zeros(p.dim()))?;
    let n = p.dim();
    Ok((0..a.algebra_dim())
        .map(|i| {
            let gen = a.generator_jacobian(i, &Vector::zeros(n));
            let m = gen.transpose() * &omega;
            let sym = (&m + m.transpose()) * 0.5;
            let (s1, s2) = (sym.clone(), sym);
            SmoothMap::scalar(format!("J{i}"), n, move |z| 0.5 * z.dot(&(&s1 * z)))
                .with_gradient(move |z| &s2 * z)
                .tagged(a.name().to_string())
        })
        .collect())
}

fn periodic_obstruction(
    a: &GroupAction,
    p: &PoissonStructure,
    probes: &Probes,
) -> Result<Option<String>> {
    let chart = a.chart();
    let mut rng = probes.rng();
    let base = chart.sample(&mut rng);
    const NODES: usize = 64;
    for (k, period) in chart.periods().iter().enumerate() {
        let Some(period) = period else { continue };
        for i in 0..a.algebra_dim() {
            // ∮ ω(ξ_M, ∂_k) along the closed coordinate loop in direction k;
            // the trapezoid rule is spectrally accurate for periodic integrands
            let mut integral = 0.0;
            for s in 0..NODES {
                let mut z = base.clone();
                z[k] += period * s as f64 / NODES as f64;
                let omega = p.require_form(&z)?;
                let xi = a.generators_at(&z).column(i).into_owned();
                integral += (xi.transpose() * &omega)[k];
            }
            integral *= period / NODES as f64;
            if integral.abs() > 1e-8 {
                return Ok(Some(format!(
                    "ι(ξ_{i})ω integrates to {integral:.6} around the loop of coordinate {k}, so it is not exact"
                )));
            }
        }
    }
    Ok(None)
}

/// Validate a declared momentum map for the action.
///
/// Obstructions are checked first: a generator outside the image of `B`
/// cannot be Hamiltonian, and on a symplectic chart with periodic
/// coordinates a nonzero period of `ι(ξ_M) ω` rules out a global primitive.
/// Finite groups get the zero map.
pub fn classical_momentum(
    a: &GroupAction,
    p: &PoissonStructure,
    declared: Option<Vec<SmoothMap>>,
    probes: &Probes,
    tol: f64,
) -> Result<ClassicalMomentumMap> {
    if a.chart().id() != p.chart().id() {
        return Err(Error::ChartMismatch {
            expected: p.chart().id().into(),
            found: a.chart().id().into(),
        });
    }
    let d = a.algebra_dim();
    if d == 0 {
        return Ok(ClassicalMomentumMap {
            action: a.name().into(),
            components: Vec::new(),
        });
    }
    let points = probes.points(a.chart());
    for z in &points {
        let b = p.tensor(z);
        let range = Subspace::span(&b);
        let gens = a.generators_at(z);
        for i in 0..d {
            let r = range.relative_residual(&gens.column(i).into_owned());
            if r > 1e-8 {
                return Err(Error::NotHamiltonian(format!(
                    "generator {i} is not in the image of the Poisson tensor (relative residual {r:.3e})"
                )));
            }
        }
    }
    if p.kind() == StructureKind::Symplectic {
        if let Some(why) = periodic_obstruction(a, p, probes)? {
            return Err(Error::NotHamiltonian(why));
        }
    }
    let components = declared
        .ok_or_else(|| Error::NotHamiltonian("no momentum map declared for the action".into()))?;
    if components.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: components.len(),
        });
    }
    let j = ClassicalMomentumMap {
        action: a.name().into(),
        components,
    };
    let mut rng = probes.rng();
    for z in &points {
        let gens = a.generators_at(z);
        for (i, c) in j.components.iter().enumerate() {
            let x = hamiltonian_vector_field(p, c)?.eval(z);
            let r = (&x - gens.column(i)).amax() / gens.column(i).amax().max(1.0);
            if r > tol {
                return Err(Error::NotHamiltonian(format!(
                    "X_(J{i}) differs from the generator by {r:.3e} at a probe"
                )));
            }
        }
        let g = a.sample(&mut rng);
        let lhs = j.value(&a.act(&g, z));
        let rhs = a.coadjoint_matrix(&g) * j.value(z);
        let r = (&lhs - &rhs).amax() / rhs.amax().max(1.0);
        if r > tol {
            return Err(Error::NotHamiltonian(format!(
                "momentum map is not equivariant (residual {r:.3e})"
            )));
        }
    }
    Ok(j)
}

/// Sample times at which conserved quantities are compared along a flow.
pub const NOETHER_CHECKPOINTS: usize = 10;

/// Integrate `X_h` and compare `J(F_t z)` with `J(z)` at checkpoints up to
/// `horizon`. `h` must carry an invariance tag for the momentum map's action.
pub fn check_noether_classical(
    j: &ClassicalMomentumMap,
    p: &PoissonStructure,
    h: &SmoothMap,
    horizon: f64,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    match h.invariance_tag() {
        Some(tag) if tag == j.action_name() => {}
        _ => {
            return Err(Error::Precondition(format!(
                "Hamiltonian `{}` is not tagged invariant under `{}`",
                h.name(),
                j.action_name()
            )))
        }
    }
    let field = hamiltonian_vector_field(p, h)?;
    let f = |z: &Vector| field.eval(z);
    let ctrl = StepControl::default();
    let mut report = CheckReport::new("noether.classical", tol);
    for z in probes.points(p.chart()) {
        let j0 = j.value(&z);
        let mut state = z.clone();
        let dt = horizon / NOETHER_CHECKPOINTS as f64;
        let mut worst: f64 = 0.0;
        for _ in 0..NOETHER_CHECKPOINTS {
            state = ode::integrate(&f, &state, dt, &ctrl, None)?.end;
            worst = worst.max((j.value(&state) - &j0).amax());
        }
        report.record(worst);
    }
    Ok(report)
}

/// Result of comparing `(V*)^H` with `(V^H)*` through restriction.
#[derive(Clone, Debug, PartialEq)]
pub struct DualIsomorphismReport {
    pub fixed_dim: usize,
    pub dual_fixed_dim: usize,
    pub rank: usize,
    pub condition: f64,
    pub fixed: Subspace,
    pub dual_fixed: Subspace,
}

impl DualIsomorphismReport {
    pub fn is_isomorphism(&self) -> bool {
        self.fixed_dim == self.dual_fixed_dim
            && self.rank == self.fixed_dim
            && self.condition.is_finite()
    }
}

/// Build `V^H` and `(V*)^H` from the exact averaging projector `P` (the
/// contragredient projector is `Pᵀ`) and test that restriction of fixed
/// covectors to fixed vectors is bijective.
pub fn fixed_dual_isomorphism_check(h: &GroupAction) -> Result<DualIsomorphismReport> {
    let p = h.averaging_projector()?;
    let fixed = Subspace::span(&p);
    let dual_fixed = Subspace::span(&p.transpose());
    let restriction = fixed.basis().transpose() * dual_fixed.basis();
    let rank = crate::linalg::numerical_rank(&restriction, RANK_REL_TOL);
    let condition = if restriction.nrows() == 0 && restriction.ncols() == 0 {
        1.0
    } else {
        let (smin, smax) = crate::linalg::singular_extremes(&restriction);
        if smin > 0.0 && restriction.nrows() == restriction.ncols() {
            smax / smin
        } else {
            f64::INFINITY
        }
    };
    Ok(DualIsomorphismReport {
        fixed_dim: fixed.dim(),
        dual_fixed_dim: dual_fixed.dim(),
        rank,
        condition,
        fixed,
        dual_fixed,
    })
}

/// Both sides of `((T_z(G·z))°)^H = span{dσ(z)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpanReport {
    pub invariant_differentials: Subspace,
    pub fixed_annihilator: Subspace,
    pub max_angle: f64,
}

impl SpanReport {
    pub fn dims_agree(&self) -> bool {
        self.invariant_differentials.dim() == self.fixed_annihilator.dim()
    }
}

/// Compare the span of the invariants' differentials with the isotropy-fixed
/// part of the orbit annihilator. Meaningful for linear representations,
/// where the isotropy representation on `T_z M` is the linearized action.
pub fn invariant_differential_span_check(
    a: &GroupAction,
    sigma: &[SmoothMap],
    z: &PhasePoint,
) -> Result<SpanReport> {
    let n = a.chart().dim();
    let zc = z.coords();
    let mut grads = Vec::with_capacity(sigma.len());
    for s in sigma {
        grads.push(s.gradient(zc)?);
    }
    let lhs = Subspace::from_vectors(n, &grads);
    let iso = isotropy_at(a, zc);
    let rhs = orbit_tangent(a, zc)
        .annihilator()
        .intersection(&fixed_covectors(a, &iso));
    Ok(SpanReport {
        max_angle: lhs.max_angle(&rhs),
        invariant_differentials: lhs,
        fixed_annihilator: rhs,
    })
}

/// `B♯(z)` intertwines the isotropy action on covectors and vectors:
/// `TΦ_h B(z) TΦ_hᵀ = B(z)` for finite stabilizer elements and
/// `A_η B + B A_ηᵀ = 0` for stabilizer algebra elements.
pub fn bsharp_equivariance_check(
    a: &GroupAction,
    p: &PoissonStructure,
    z: &Vector,
    tol: f64,
) -> CheckReport {
    let iso = isotropy_at(a, z);
    let b = p.tensor(z);
    let mut report = CheckReport::new("isotropy.bsharp_equivariance", tol);
    if a.finite_order().is_some() {
        for &i in &iso.finite_stabilizer {
            let g = GroupElement::Index(i);
            let t = a.tangent_map(&g, z);
            report.record(max_abs(
                &(&t * &b * t.transpose() - p.tensor(&a.act(&g, z))),
            ));
        }
    }
    for c in iso.algebra_basis.column_iter() {
        let op = a.algebra_operator(&c.into_owned(), z);
        report.record(max_abs(&(&op * &b + &b * op.transpose())));
    }
    report
}

/// Largest principal angle between `B♯(V^H)` and `(B♯ V)^H` for a covector
/// subspace `V` at `z`.
pub fn bsharp_fixed_angle(a: &GroupAction, p: &PoissonStructure, z: &Vector, v: &Subspace) -> f64 {
    let iso = isotropy_at(a, z);
    let b = p.tensor(z);
    let lhs = v.intersection(&fixed_covectors(a, &iso)).image(&b);
    let rhs = v.image(&b).intersection(&fixed_tangent(a, &iso));
    lhs.max_angle(&rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn torus_chart() -> Arc<Chart> {
        Arc::new(Chart::with_periods(
            "T2",
            vec![Some(2.0 * PI), Some(2.0 * PI)],
        ))
    }

    fn torus_structure() -> PoissonStructure {
        PoissonStructure::constant_symplectic(
            torus_chart(),
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        )
        .unwrap()
    }

    fn shift() -> GroupAction {
        GroupAction::translation(
            "S1",
            torus_chart(),
            Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
            vec![Some(2.0 * PI)],
        )
        .unwrap()
    }

    fn reflection() -> GroupAction {
        let chart = Arc::new(Chart::euclidean("R2", 2));
        GroupAction::finite(
            "Z2",
            chart,
            vec![
                Matrix::identity(2, 2),
                Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            ],
        )
        .unwrap()
    }

    fn weight_one_zero() -> GroupAction {
        let chart = Arc::new(Chart::euclidean("R4", 4));
        GroupAction::torus("S1w", chart, vec![(0, 1), (2, 3)], vec![vec![1], vec![0]]).unwrap()
    }

    #[test]
    fn finite_group_requires_closure() {
        let chart = Arc::new(Chart::euclidean("R2", 2));
        let rot = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let err = GroupAction::finite("bad", chart, vec![Matrix::identity(2, 2), rot]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn shift_on_torus_is_canonical_and_axiomatic() {
        let a = shift();
        let p = torus_structure();
        assert!(check_action_axioms(&a, &Probes::new(50, 3), 1e-10).passed);
        assert!(check_generators(&a, &Probes::new(10, 3), 1e-6).passed);
        assert!(
            is_canonical(&a, &p, &Probes::new(20, 3), 1e-10)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn torus_shift_has_no_momentum_map() {
        let err = classical_momentum(&shift(), &torus_structure(), None, &Probes::new(5, 1), 1e-8)
            .unwrap_err();
        assert!(matches!(err, Error::NotHamiltonian(_)), "{err}");
    }

    #[test]
    fn area_preserving_shear_is_canonical_but_dilation_is_not() {
        let p = torus_structure();
        let shear = GroupAction::matrix_lie(
            "shear",
            torus_chart(),
            vec![Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])],
        )
        .unwrap();
        // det [[1, λ], [0, 1]] = 1, so the pullback of dθ1∧dθ2 is itself
        assert!(
            is_canonical(&shear, &p, &Probes::new(20, 5), 1e-10)
                .unwrap()
                .passed
        );
        let dilation = GroupAction::matrix_lie(
            "dilation",
            torus_chart(),
            vec![Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])],
        )
        .unwrap();
        // Φ_λ^* ω = e^λ ω
        assert!(
            !is_canonical(&dilation, &p, &Probes::new(20, 5), 1e-6)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn finite_isotropy_at_fixed_and_free_points() {
        let a = reflection();
        let fixed = isotropy_at(&a, &Vector::from_vec(vec![0.7, 0.0]));
        assert_eq!(fixed.finite_stabilizer, vec![0, 1]);
        assert_eq!(fixed.class_id, "finite[1,2]");
        let free = isotropy_at(&a, &Vector::from_vec(vec![0.7, 0.2]));
        assert_eq!(free.finite_stabilizer, vec![0]);
        assert_eq!(free.class_id, "finite[1]");
    }

    #[test]
    fn torus_isotropy_dimension() {
        let a = weight_one_zero();
        assert_eq!(
            isotropy_at(&a, &Vector::from_vec(vec![0.0, 0.0, 1.0, 2.0])).algebra_dim(),
            1
        );
        assert_eq!(
            isotropy_at(&a, &Vector::from_vec(vec![0.5, 0.0, 1.0, 2.0])).algebra_dim(),
            0
        );
    }

    #[test]
    fn averaging_projectors_are_exact() {
        let p = reflection().averaging_projector().unwrap();
        assert_eq!(p, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let p = weight_one_zero().averaging_projector().unwrap();
        let expected = Matrix::from_diagonal(&Vector::from_vec(vec![0.0, 0.0, 1.0, 1.0]));
        assert!(max_abs(&(p - expected)) < 1e-15);
    }

    #[test]
    fn fixed_dual_isomorphism_on_fixtures() {
        let r = fixed_dual_isomorphism_check(&reflection()).unwrap();
        assert_eq!((r.fixed_dim, r.dual_fixed_dim, r.rank), (1, 1, 1));
        assert!(r.is_isomorphism());
        let dx = Subspace::from_vectors(2, &[Vector::from_vec(vec![1.0, 0.0])]);
        assert!(r.dual_fixed.max_angle(&dx) < 1e-12);
        let r = fixed_dual_isomorphism_check(&weight_one_zero()).unwrap();
        assert_eq!((r.fixed_dim, r.dual_fixed_dim, r.rank), (2, 2, 2));
        assert!(r.is_isomorphism());
    }

    #[test]
    fn trivial_group_fixes_everything() {
        let chart = Arc::new(Chart::euclidean("R3", 3));
        let trivial = GroupAction::finite("e", chart, vec![Matrix::identity(3, 3)]).unwrap();
        let r = fixed_dual_isomorphism_check(&trivial).unwrap();
        assert_eq!((r.fixed_dim, r.dual_fixed_dim), (3, 3));
        assert!((r.condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lie_algebra_generators_need_averaging_model() {
        let a = GroupAction::matrix_lie("m", torus_chart(), vec![Matrix::zeros(2, 2)]).unwrap();
        assert!(matches!(
            fixed_dual_isomorphism_check(&a),
            Err(Error::Precondition(_))
        ));
    }
}
