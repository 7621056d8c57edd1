//! Phase spaces as single flat charts carrying a Poisson tensor.
//!
//! Sign conventions: the bracket is `{f, g}(z) = df(z)ᵀ B(z) dg(z)`, the
//! Hamiltonian vector field is `X_h = B(z) dh(z)` so that `df(X_h) = {f, h}`,
//! and a symplectic form `ω` is related to its tensor by `B ω = -I`. With
//! those choices `ω(X_f, v) = df(v)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, Matrix, Subspace, Vector};
use crate::ode::{self, StepControl};
use crate::report::CheckReport;

/// A coordinate chart: dimension, per-coordinate periods, and the box used
/// when sampling probe points.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    id: String,
    periods: Vec<Option<f64>>,
    sample_radius: f64,
}

impl Chart {
    pub fn euclidean(id: impl Into<String>, dim: usize) -> Self {
        Self {
            id: id.into(),
            periods: vec![None; dim],
            sample_radius: 1.0,
        }
    }

    pub fn with_periods(id: impl Into<String>, periods: Vec<Option<f64>>) -> Self {
        Self {
            id: id.into(),
            periods,
            sample_radius: 1.0,
        }
    }

    pub fn sample_radius(mut self, r: f64) -> Self {
        self.sample_radius = r;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.periods.len()
    }

    pub fn periods(&self) -> &[Option<f64>] {
        &self.periods
    }

    pub fn radius(&self) -> f64 {
        self.sample_radius
    }

    /// Reduce periodic coordinates into `[0, period)`.
    pub fn wrap(&self, v: &Vector) -> Vector {
        let mut out = v.clone();
        for (x, p) in out.iter_mut().zip(&self.periods) {
            if let Some(p) = p {
                *x = x.rem_euclid(*p);
                if *x >= *p {
                    *x = 0.0;
                }
            }
        }
        out
    }

    /// `a - b` with periodic components taken in `[-period/2, period/2)`.
    pub fn difference(&self, a: &Vector, b: &Vector) -> Vector {
        let mut d = a - b;
        for (x, p) in d.iter_mut().zip(&self.periods) {
            if let Some(p) = p {
                *x = (*x + 0.5 * p).rem_euclid(*p) - 0.5 * p;
            }
        }
        d
    }

    pub fn distance(&self, a: &Vector, b: &Vector) -> f64 {
        self.difference(a, b).norm()
    }

    pub fn point(self: &Arc<Self>, coords: Vector) -> Result<PhasePoint> {
        PhasePoint::new(self.clone(), coords)
    }

    /// Uniform sample: periodic coordinates over a full period, others in
    /// `[-r, r]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        Vector::from_iterator(
            self.dim(),
            self.periods.iter().map(|p| match p {
                Some(p) => rng.random_range(0.0..*p),
                None => rng.random_range(-self.sample_radius..self.sample_radius),
            }),
        )
    }
}

/// A point of a chart. Periodic coordinates are stored reduced.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    chart: Arc<Chart>,
    coords: Vector,
}

impl PhasePoint {
    pub fn new(chart: Arc<Chart>, coords: Vector) -> Result<Self> {
        if coords.len() != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: coords.len(),
            });
        }
        let coords = chart.wrap(&coords);
        Ok(Self { chart, coords })
    }

    pub fn coords(&self) -> &Vector {
        &self.coords
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn chart_id(&self) -> &str {
        self.chart.id()
    }
}

impl fmt::Display for PhasePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

type EvalFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type JacFn = dyn Fn(&Vector) -> Matrix + Send + Sync;

/// A smooth map `R^n -> R^k` with an optional analytic Jacobian.
///
/// Without an analytic Jacobian, derivatives are central differences with
/// step `cbrt(eps) * max(1, |z_i|)`.
#[derive(Clone)]
pub struct SmoothMap {
    name: String,
    input_dim: usize,
    output_dim: usize,
    eval: Arc<EvalFn>,
    jacobian: Option<Arc<JacFn>>,
    invariance: Option<String>,
    finite_differences: bool,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("name", &self.name)
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("invariance", &self.invariance)
            .finish()
    }
}

/// Central-difference Jacobian of `f` at `z`.
pub fn fd_jacobian<F>(f: F, z: &Vector, k: usize) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let n = z.len();
    let base_step = f64::EPSILON.cbrt();
    let mut jac = Matrix::zeros(k, n);
    let mut zp = z.clone();
    for i in 0..n {
        let h = base_step * z[i].abs().max(1.0);
        zp[i] = z[i] + h;
        let fp = f(&zp);
        zp[i] = z[i] - h;
        let fm = f(&zp);
        zp[i] = z[i];
        jac.set_column(i, &((fp - fm) / (2.0 * h)));
    }
    jac
}

impl SmoothMap {
    pub fn vector<F>(name: impl Into<String>, input_dim: usize, output_dim: usize, eval: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            input_dim,
            output_dim,
            eval: Arc::new(eval),
            jacobian: None,
            invariance: None,
            finite_differences: true,
        }
    }

    pub fn scalar<F>(name: impl Into<String>, input_dim: usize, eval: F) -> Self
    where
        F: Fn(&Vector) -> f64 + Send + Sync + 'static,
    {
        Self::vector(name, input_dim, 1, move |z| {
            Vector::from_element(1, eval(z))
        })
    }

    /// Attach an analytic gradient to a scalar map.
    pub fn with_gradient<G>(mut self, grad: G) -> Self
    where
        G: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        assert_eq!(self.output_dim, 1, "gradient on a vector-valued map");
        let n = self.input_dim;
        self.jacobian = Some(Arc::new(move |z| {
            Matrix::from_row_slice(1, n, grad(z).as_slice())
        }));
        self
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    /// Declare the map invariant under the named group action. This is a
    /// claim; `group_action::validate_invariance` checks it.
    pub fn tagged(mut self, action: impl Into<String>) -> Self {
        self.invariance = Some(action.into());
        self
    }

    pub fn without_finite_differences(mut self) -> Self {
        self.finite_differences = false;
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn invariance_tag(&self) -> Option<&str> {
        self.invariance.as_deref()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn is_differentiable(&self) -> bool {
        self.jacobian.is_some() || self.finite_differences
    }

    pub fn is_scalar(&self) -> bool {
        self.output_dim == 1
    }

    fn check_input(&self, z: &Vector) -> Result<()> {
        if z.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: z.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, z: &Vector) -> Vector {
        (self.eval)(z)
    }

    /// Value of a scalar map.
    pub fn value(&self, z: &Vector) -> f64 {
        (self.eval)(z)[0]
    }

    /// `k x n` Jacobian, analytic when available.
    pub fn jacobian(&self, z: &Vector) -> Result<Matrix> {
        self.check_input(z)?;
        if let Some(j) = &self.jacobian {
            return Ok(j(z));
        }
        if !self.finite_differences {
            return Err(Error::Differentiation(self.name.clone()));
        }
        Ok(fd_jacobian(|x| (self.eval)(x), z, self.output_dim))
    }

    pub fn fd_only_jacobian(&self, z: &Vector) -> Matrix {
        fd_jacobian(|x| (self.eval)(x), z, self.output_dim)
    }

    pub fn gradient(&self, z: &Vector) -> Result<Vector> {
        if self.output_dim != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: self.output_dim,
            });
        }
        Ok(self.jacobian(z)?.row(0).transpose())
    }

    /// Composition `self ∘ inner`.
    pub fn compose(&self, inner: &SmoothMap) -> SmoothMap {
        assert_eq!(
            inner.output_dim, self.input_dim,
            "composition dimension mismatch"
        );
        let (outer, inner_map) = (self.clone(), inner.clone());
        let (o2, i2) = (self.clone(), inner.clone());
        let analytic = self.jacobian.is_some() && inner.jacobian.is_some();
        let mut out = SmoothMap::vector(
            format!("{}∘{}", self.name, inner.name),
            inner.input_dim,
            self.output_dim,
            move |z| outer.eval(&inner_map.eval(z)),
        );
        if analytic {
            out = out.with_jacobian(move |z| {
                let y = i2.eval(z);
                o2.jacobian(&y).expect("analytic") * i2.jacobian(z).expect("analytic")
            });
        }
        // an invariant inner map makes every composite invariant
        out.invariance = inner.invariance.clone();
        out
    }

    /// Pointwise product of two scalar maps, with the Leibniz-rule gradient.
    pub fn product(&self, other: &SmoothMap) -> SmoothMap {
        assert!(self.is_scalar() && other.is_scalar());
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        SmoothMap::scalar(
            format!("({})*({})", self.name, other.name),
            self.input_dim,
            move |z| a.value(z) * b.value(z),
        )
        .with_gradient(move |z| {
            a2.gradient(z).expect("gradient") * b2.value(z)
                + b2.gradient(z).expect("gradient") * a2.value(z)
        })
    }

    /// Largest relative disagreement between the analytic Jacobian and
    /// central differences over `points`. Zero when no analytic Jacobian.
    pub fn jacobian_fd_residual(&self, points: &[Vector]) -> f64 {
        let Some(j) = &self.jacobian else { return 0.0 };
        points
            .iter()
            .map(|z| {
                let a = j(z);
                let fd = self.fd_only_jacobian(z);
                max_abs(&(&a - &fd)) / max_abs(&a).max(1.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Whether a Poisson structure comes from a symplectic form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureKind {
    Symplectic,
    GeneralPoisson,
}

type MatFn = dyn Fn(&Vector) -> Matrix + Send + Sync;

/// A Poisson tensor field `z -> B(z)` on a chart, optionally with the
/// symplectic form it inverts.
#[derive(Clone)]
pub struct PoissonStructure {
    chart: Arc<Chart>,
    tensor: Arc<MatFn>,
    form: Option<Arc<MatFn>>,
    kind: StructureKind,
}

impl fmt::Debug for PoissonStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoissonStructure")
            .field("chart", &self.chart.id())
            .field("kind", &self.kind)
            .finish()
    }
}

impl PoissonStructure {
    /// Constant symplectic form; the tensor is `-ω⁻¹`.
    pub fn constant_symplectic(chart: Arc<Chart>, omega: Matrix) -> Result<Self> {
        let n = chart.dim();
        if omega.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: omega.nrows(),
            });
        }
        let inv = omega
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Validation("symplectic form is degenerate".into()))?;
        let b = -inv;
        Ok(Self {
            chart,
            tensor: Arc::new(move |_| b.clone()),
            form: Some(Arc::new(move |_| omega.clone())),
            kind: StructureKind::Symplectic,
        })
    }

    pub fn constant_poisson(chart: Arc<Chart>, b: Matrix) -> Result<Self> {
        let n = chart.dim();
        if b.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.nrows(),
            });
        }
        Ok(Self {
            chart,
            tensor: Arc::new(move |_| b.clone()),
            form: None,
            kind: StructureKind::GeneralPoisson,
        })
    }

    pub fn from_tensor<F>(chart: Arc<Chart>, tensor: F) -> Self
    where
        F: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        Self {
            chart,
            tensor: Arc::new(tensor),
            form: None,
            kind: StructureKind::GeneralPoisson,
        }
    }

    /// Symplectic structure from a form field; the tensor is `-ω(z)⁻¹`.
    pub fn from_form<F>(chart: Arc<Chart>, form: F) -> Self
    where
        F: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        let form: Arc<MatFn> = Arc::new(form);
        let f2 = form.clone();
        Self {
            chart,
            tensor: Arc::new(move |z| {
                -f2(z)
                    .try_inverse()
                    .unwrap_or_else(|| Matrix::from_element(z.len(), z.len(), f64::NAN))
            }),
            form: Some(form),
            kind: StructureKind::Symplectic,
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub fn tensor(&self, z: &Vector) -> Matrix {
        (self.tensor)(z)
    }

    pub fn form(&self, z: &Vector) -> Option<Matrix> {
        self.form.as_ref().map(|f| f(z))
    }

    pub fn require_form(&self, z: &Vector) -> Result<Matrix> {
        self.form(z).ok_or(Error::NotSymplectic)
    }

    pub fn check_point(&self, z: &PhasePoint) -> Result<()> {
        if z.chart_id() != self.chart.id() {
            return Err(Error::ChartMismatch {
                expected: self.chart.id().into(),
                found: z.chart_id().into(),
            });
        }
        Ok(())
    }

    /// `max |B + Bᵀ|` at `z`.
    pub fn antisymmetry_residual(&self, z: &Vector) -> f64 {
        let b = self.tensor(z);
        max_abs(&(&b + b.transpose()))
    }

    /// Largest component of the Jacobi tensor
    /// `B^{il} ∂_l B^{jk} + B^{jl} ∂_l B^{ki} + B^{kl} ∂_l B^{ij}`.
    pub fn jacobi_residual(&self, z: &Vector) -> f64 {
        let n = self.dim();
        let b = self.tensor(z);
        let derivs: Vec<Matrix> = (0..n)
            .map(|l| partial_matrix(&*self.tensor, z, l))
            .collect();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for (l, dl) in derivs.iter().enumerate() {
                        s += b[(i, l)] * dl[(j, k)]
                            + b[(j, l)] * dl[(k, i)]
                            + b[(k, l)] * dl[(i, j)];
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }

    /// `max |B ω + I|`; errors for non-symplectic structures.
    pub fn inverse_residual(&self, z: &Vector) -> Result<f64> {
        let w = self.require_form(z)?;
        let n = self.dim();
        Ok(max_abs(&(self.tensor(z) * w + Matrix::identity(n, n))))
    }

    /// Largest component of `dω` by central differences.
    pub fn closedness_residual(&self, z: &Vector) -> Result<f64> {
        let form = self.form.as_ref().ok_or(Error::NotSymplectic)?;
        Ok(exterior_derivative_residual(&**form, z))
    }
}

/// Central-difference partial derivative of a matrix field along axis `l`.
pub fn partial_matrix(field: &dyn Fn(&Vector) -> Matrix, z: &Vector, l: usize) -> Matrix {
    let h = f64::EPSILON.cbrt() * z[l].abs().max(1.0);
    let mut zp = z.clone();
    zp[l] += h;
    let fp = field(&zp);
    zp[l] = z[l] - h;
    let fm = field(&zp);
    (fp - fm) / (2.0 * h)
}

/// Largest component of the exterior derivative of a 2-form field,
/// `∂_a ω_bc + ∂_b ω_ca + ∂_c ω_ab`, by differences with step `cbrt(eps)`.
pub fn exterior_derivative_residual(form: &dyn Fn(&Vector) -> Matrix, z: &Vector) -> f64 {
    exterior_derivative_residual_with_step(form, z, f64::EPSILON.cbrt())
}

pub fn exterior_derivative_residual_with_step(
    form: &dyn Fn(&Vector) -> Matrix,
    z: &Vector,
    step: f64,
) -> f64 {
    let n = z.len();
    let derivs: Vec<Matrix> = (0..n)
        .map(|l| {
            let h = step * z[l].abs().max(1.0);
            let mut zp = z.clone();
            zp[l] += h;
            let fp = form(&zp);
            zp[l] = z[l] - h;
            let fm = form(&zp);
            (fp - fm) / (2.0 * h)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let s = derivs[a][(b, c)] + derivs[b][(c, a)] + derivs[c][(a, b)];
                worst = worst.max(s.abs());
            }
        }
    }
    worst
}

fn require_scalar_on(p: &PoissonStructure, f: &SmoothMap) -> Result<()> {
    if f.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: f.output_dim(),
        });
    }
    if f.input_dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: f.input_dim(),
        });
    }
    Ok(())
}

/// `{f, g}(z) = df(z)ᵀ B(z) dg(z)`.
pub fn poisson_bracket(
    p: &PoissonStructure,
    f: &SmoothMap,
    g: &SmoothMap,
    z: &PhasePoint,
) -> Result<f64> {
    p.check_point(z)?;
    bracket_at(p, f, g, z.coords())
}

/// Bracket on raw chart coordinates.
pub fn bracket_at(p: &PoissonStructure, f: &SmoothMap, g: &SmoothMap, z: &Vector) -> Result<f64> {
    require_scalar_on(p, f)?;
    require_scalar_on(p, g)?;
    let df = f.gradient(z)?;
    let dg = g.gradient(z)?;
    Ok(tensor_pairing(&p.tensor(z), &df, &dg))
}

/// `αᵀ B β` summed over the upper triangle as `B_ij (α_i β_j - α_j β_i)`,
/// which is exactly antisymmetric in `(α, β)` in floating point.
pub fn tensor_pairing(b: &Matrix, alpha: &Vector, beta: &Vector) -> f64 {
    let n = b.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += b[(i, j)] * (alpha[i] * beta[j] - alpha[j] * beta[i]);
        }
    }
    s
}

/// `X_h = B dh` as a vector-valued map.
pub fn hamiltonian_vector_field(p: &PoissonStructure, h: &SmoothMap) -> Result<SmoothMap> {
    require_scalar_on(p, h)?;
    let (p1, h1) = (p.clone(), h.clone());
    if !h.is_differentiable() {
        return Err(Error::Differentiation(h.name().to_string()));
    }
    Ok(SmoothMap::vector(
        format!("X_{}", h.name()),
        p.dim(),
        p.dim(),
        move |z| p1.tensor(z) * h1.gradient(z).expect("gradient checked at construction"),
    ))
}

/// Flow of `X_h` for time `t` from `z0`, with adaptive error control.
pub fn flow(
    p: &PoissonStructure,
    h: &SmoothMap,
    z0: &PhasePoint,
    t: f64,
    ctrl: &StepControl,
) -> Result<PhasePoint> {
    p.check_point(z0)?;
    let field = hamiltonian_vector_field(p, h)?;
    let tr = ode::integrate(&|z: &Vector| field.eval(z), z0.coords(), t, ctrl, None)?;
    PhasePoint::new(p.chart().clone(), tr.end)
}

/// `V^ω = B♯(V°)` for a subspace `V` of the tangent space at `z`.
pub fn symplectic_orthogonal(
    p: &PoissonStructure,
    v: &Subspace,
    z: &PhasePoint,
) -> Result<Subspace> {
    p.check_point(z)?;
    if p.kind() != StructureKind::Symplectic {
        return Err(Error::NotSymplectic);
    }
    if v.ambient_dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: v.ambient_dim(),
        });
    }
    Ok(v.annihilator().image(&p.tensor(z.coords())))
}

/// Deterministic probe batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Probes {
    pub count: usize,
    pub seed: u64,
}

impl Probes {
    pub fn new(count: usize, seed: u64) -> Self {
        Self { count, seed }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    pub fn points(&self, chart: &Chart) -> Vec<Vector> {
        let mut rng = self.rng();
        (0..self.count).map(|_| chart.sample(&mut rng)).collect()
    }
}

/// Random covector batch used as test-function gradients.
fn random_covectors<R: Rng>(rng: &mut R, n: usize, count: usize) -> Vec<Vector> {
    let mut out: Vec<Vector> = (0..n)
        .map(|i| {
            let mut e = Vector::zeros(n);
            e[i] = 1.0;
            e
        })
        .collect();
    for _ in 0..count {
        out.push(Vector::from_iterator(
            n,
            (0..n).map(|_| rng.random_range(-1.0..1.0)),
        ));
    }
    out
}

/// Check `Tφ ∘ X_{h∘φ} = X_h ∘ φ` for sampled test functions `h` on the
/// target. Test functions are linear, so their gradients range over
/// coordinate and random covectors; the residual is taken on the vector
/// fields. The Jacobian of `φ` uses chart-aware differences on the target.
pub fn is_poisson_map(
    phi: &SmoothMap,
    source: &PoissonStructure,
    target: &PoissonStructure,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    if phi.input_dim() != source.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: phi.input_dim(),
        });
    }
    if phi.output_dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            found: phi.output_dim(),
        });
    }
    let mut report = CheckReport::new("poisson_map", tol);
    let mut rng = probes.rng();
    let target_chart = target.chart().clone();
    for _ in 0..probes.count {
        let z = source.chart().sample(&mut rng);
        let image = phi.eval(&z);
        let dphi = if phi.has_analytic_jacobian() {
            phi.jacobian(&z)?
        } else {
            chart_jacobian(|x| phi.eval(x), &z, &target_chart)
        };
        let b1 = source.tensor(&z);
        let b2 = target.tensor(&image);
        let mut worst: f64 = 0.0;
        for dh in random_covectors(&mut rng, target.dim(), 3) {
            let lhs = &dphi * (&b1 * (dphi.transpose() * &dh));
            let rhs = &b2 * &dh;
            worst = worst.max((lhs - rhs).amax());
        }
        report.record(worst);
    }
    Ok(report)
}

/// Central-difference Jacobian of a map into `chart`, differencing images
/// with the chart's periodic difference.
pub fn chart_jacobian<F>(f: F, z: &Vector, chart: &Chart) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let n = z.len();
    let k = chart.dim();
    let mut jac = Matrix::zeros(k, n);
    let mut zp = z.clone();
    for i in 0..n {
        let h = f64::EPSILON.cbrt() * z[i].abs().max(1.0);
        zp[i] = z[i] + h;
        let fp = f(&zp);
        zp[i] = z[i] - h;
        let fm = f(&zp);
        zp[i] = z[i];
        jac.set_column(i, &(chart.difference(&fp, &fm) / (2.0 * h)));
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn torus() -> PoissonStructure {
        let chart = Arc::new(Chart::with_periods(
            "T2",
            vec![Some(2.0 * PI), Some(2.0 * PI)],
        ));
        PoissonStructure::constant_symplectic(
            chart,
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        )
        .unwrap()
    }

    fn r3() -> PoissonStructure {
        let chart = Arc::new(Chart::euclidean("R3", 3));
        let b = Matrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0]);
        PoissonStructure::constant_poisson(chart, b).unwrap()
    }

    fn coord(n: usize, i: usize) -> SmoothMap {
        SmoothMap::scalar(format!("x{i}"), n, move |z| z[i]).with_gradient(move |_| {
            let mut e = Vector::zeros(n);
            e[i] = 1.0;
            e
        })
    }

    #[test]
    fn r3_bracket_of_coordinates() {
        let p = r3();
        let z = p
            .chart()
            .point(Vector::from_vec(vec![0.3, -2.0, 5.0]))
            .unwrap();
        assert_eq!(
            poisson_bracket(&p, &coord(3, 0), &coord(3, 1), &z).unwrap(),
            1.0
        );
        assert_eq!(
            poisson_bracket(&p, &coord(3, 1), &coord(3, 0), &z).unwrap(),
            -1.0
        );
    }

    #[test]
    fn torus_bracket_of_angles_inverts_form_by_hand() {
        // ω = [[0,1],[-1,0]] has inverse [[0,-1],[1,0]], so B = -ω⁻¹ = [[0,1],[-1,0]]
        let p = torus();
        let z = p.chart().point(Vector::from_vec(vec![1.0, 4.0])).unwrap();
        assert_eq!(
            poisson_bracket(&p, &coord(2, 0), &coord(2, 1), &z).unwrap(),
            1.0
        );
        assert!(p.inverse_residual(z.coords()).unwrap() == 0.0);
    }

    #[test]
    fn bracket_with_itself_vanishes() {
        let p = r3();
        let f = SmoothMap::scalar("f", 3, |z| z[0] * z[1] + z[2].sin());
        let z = p
            .chart()
            .point(Vector::from_vec(vec![0.3, -2.0, 5.0]))
            .unwrap();
        assert_eq!(poisson_bracket(&p, &f, &f, &z).unwrap(), 0.0);
    }

    #[test]
    fn missing_derivative_is_a_differentiation_error() {
        let p = r3();
        let f = SmoothMap::scalar("f", 3, |z| z[0]).without_finite_differences();
        let z = p.chart().point(Vector::zeros(3)).unwrap();
        assert!(matches!(
            poisson_bracket(&p, &f, &coord(3, 1), &z),
            Err(Error::Differentiation(_))
        ));
    }

    #[test]
    fn chart_mismatch_is_reported() {
        let z = torus().chart().point(Vector::zeros(2)).unwrap();
        let p = r3();
        assert!(matches!(
            poisson_bracket(&p, &coord(3, 0), &coord(3, 1), &z),
            Err(Error::ChartMismatch { .. })
        ));
    }

    #[test]
    fn r3_hamiltonian_field_matches_closed_form() {
        let p = r3();
        let f = SmoothMap::scalar("f", 3, |z| z[0] * z[0] * z[1] + z[2].sin());
        let x = hamiltonian_vector_field(&p, &f).unwrap();
        let z = Vector::from_vec(vec![0.7, -1.1, 0.4]);
        let (fx, fy, fz) = (2.0 * z[0] * z[1], z[0] * z[0], z[2].cos());
        let expected = Vector::from_vec(vec![fy, fz - fx, -fy]);
        assert!((x.eval(&z) - expected).amax() < 1e-9);
    }

    #[test]
    fn constant_hamiltonian_has_zero_field() {
        let p = r3();
        let x = hamiltonian_vector_field(&p, &SmoothMap::scalar("c", 3, |_| 2.5)).unwrap();
        assert_eq!(x.eval(&Vector::from_vec(vec![1.0, 2.0, 3.0])).amax(), 0.0);
    }

    #[test]
    fn linear_flow_on_r3_integrates_by_hand() {
        // X_y = (1, 0, -1), so from the origin at t = 1 the flow is (1, 0, -1)
        let p = r3();
        let z0 = p.chart().point(Vector::zeros(3)).unwrap();
        let z1 = flow(&p, &coord(3, 1), &z0, 1.0, &StepControl::default()).unwrap();
        assert!((z1.coords() - Vector::from_vec(vec![1.0, 0.0, -1.0])).amax() < 1e-12);
        let same = flow(&p, &coord(3, 1), &z0, 0.0, &StepControl::default()).unwrap();
        assert_eq!(same, z0);
    }

    #[test]
    fn lagrangian_line_is_its_own_orthogonal() {
        let p = torus();
        let z = p.chart().point(Vector::from_vec(vec![0.2, 0.3])).unwrap();
        let line = Subspace::from_vectors(2, &[Vector::from_vec(vec![1.0, 0.0])]);
        let orth = symplectic_orthogonal(&p, &line, &z).unwrap();
        assert!(orth.max_angle(&line) < 1e-12);
        assert_eq!(
            symplectic_orthogonal(&p, &Subspace::full(2), &z)
                .unwrap()
                .dim(),
            0
        );
        assert_eq!(
            symplectic_orthogonal(&p, &Subspace::zero(2), &z)
                .unwrap()
                .dim(),
            2
        );
        let zr = r3().chart().point(Vector::zeros(3)).unwrap();
        assert_eq!(
            symplectic_orthogonal(&r3(), &Subspace::zero(3), &zr),
            Err(Error::NotSymplectic)
        );
    }

    #[test]
    fn identity_is_poisson_and_doubling_is_not() {
        let p = torus();
        let id =
            SmoothMap::vector("id", 2, 2, |z| z.clone()).with_jacobian(|_| Matrix::identity(2, 2));
        let r = is_poisson_map(&id, &p, &p, &Probes::new(10, 1), 1e-9).unwrap();
        assert!(r.passed && r.max_residual == 0.0);
        // Tφ B Tφᵀ = 4B for φ = 2z, so h = θ2 gives X_h∘φ = (1,0) but Tφ X_{h∘φ} = (4,0)
        let double = SmoothMap::vector("double", 2, 2, |z| z * 2.0);
        let r = is_poisson_map(&double, &p, &p, &Probes::new(10, 1), 1e-6).unwrap();
        assert!(!r.passed);
        assert!((r.max_residual - 3.0).abs() < 1e-6 || r.max_residual > 3.0);
    }

    #[test]
    fn wrap_and_difference_respect_periods() {
        let c = Chart::with_periods("T2", vec![Some(2.0 * PI), None]);
        let w = c.wrap(&Vector::from_vec(vec![-0.5, -0.5]));
        assert!((w[0] - (2.0 * PI - 0.5)).abs() < 1e-15 && w[1] == -0.5);
        let d = c.difference(
            &Vector::from_vec(vec![0.1, 0.0]),
            &Vector::from_vec(vec![2.0 * PI - 0.1, 0.0]),
        );
        assert!((d[0] - 0.2).abs() < 1e-12);
    }
}
