//! Optimal reduction on declared cross-sections, reduced dynamics, and the
//! comparison with Marsden–Weinstein reduction.
//!
//! A reduced space is carried by a chart: a projection `π` defined on the
//! ambient chart near the level set, and a section `s` with `π ∘ s = id`
//! whose image lies in the level set. The reduced form at `π(z)` is the
//! unique `W` with `Rᵀ W R = Ω`, where the columns of `V` span `E(z)`,
//! `Ω = Vᵀ ω V` and `R = Dπ(z) V`.

use std::sync::Arc;

use rand::RngCore;

use crate::distribution::WordSampler;
use crate::error::{Error, Result};
use crate::group_action::{
    fixed_tangent, isotropy_at, orbit_tangent, ClassicalMomentumMap, GroupAction,
};
use crate::linalg::{
    max_abs, null_space, numerical_rank, singular_extremes, Matrix, Subspace, Vector, RANK_REL_TOL,
};
use crate::ode::{self, StepControl};
use crate::optimal_momentum::{label_at, label_distance, CharacteristicDistribution, OptimalLabel};
use crate::phase_space::{
    bracket_at, exterior_derivative_residual_with_step, hamiltonian_vector_field, Probes, SmoothMap,
};
use crate::report::CheckReport;

pub type ParamSampler = Arc<dyn Fn(&mut dyn RngCore) -> Vector + Send + Sync>;

/// `𝒥⁻¹(ρ)` described by a parametrization and a sampler of parameters.
#[derive(Clone)]
pub struct LevelSetModel {
    pub label: OptimalLabel,
    pub parametrization: SmoothMap,
    pub sampler: ParamSampler,
}

impl std::fmt::Debug for LevelSetModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "LevelSetModel({}, {})",
            self.label,
            self.parametrization.name()
        )
    }
}

impl LevelSetModel {
    pub fn new(label: OptimalLabel, parametrization: SmoothMap, sampler: ParamSampler) -> Self {
        Self {
            label,
            parametrization,
            sampler,
        }
    }

    pub fn sample_point(&self, rng: &mut dyn RngCore) -> Vector {
        let p = (self.sampler)(rng);
        self.parametrization.eval(&p)
    }

    pub fn points(&self, probes: &Probes) -> Vec<Vector> {
        let mut rng = probes.rng();
        (0..probes.count)
            .map(|_| self.sample_point(&mut rng))
            .collect()
    }
}

/// Labels of parametrized points and the tangent of the parametrization
/// against `E(z)`.
pub fn validate_level_set(
    e: &CharacteristicDistribution,
    level: &LevelSetModel,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("level_set.model", tol);
    let mut rng = probes.rng();
    for _ in 0..probes.count {
        let p = (level.sampler)(&mut rng);
        let z = level.parametrization.eval(&p);
        let mut worst = label_distance(e, &label_at(e, &z)?, &level.label)?;
        if !p.is_empty() {
            let tangent = Subspace::span(&level.parametrization.jacobian(&p)?);
            worst = worst.max(tangent.max_angle(&e.fiber(&z)));
        } else if e.fiber(&z).dim() != 0 {
            worst = f64::INFINITY;
        }
        report.record(worst);
    }
    Ok(report)
}

/// Coordinates on `M_ρ`: an ambient projection and a section into the level set.
#[derive(Clone, Debug)]
pub struct ReducedChart {
    pub dim: usize,
    pub projection: SmoothMap,
    pub section: SmoothMap,
}

impl ReducedChart {
    pub fn new(projection: SmoothMap, section: SmoothMap) -> Result<Self> {
        if projection.output_dim() != section.input_dim()
            || section.output_dim() != projection.input_dim()
        {
            return Err(Error::DimensionMismatch {
                expected: projection.output_dim(),
                found: section.input_dim(),
            });
        }
        Ok(Self {
            dim: projection.output_dim(),
            projection,
            section,
        })
    }
}

/// Reduced form at the projection of `z` from the tangent basis `v`.
/// Returns `(W, Eq. residual |Rᵀ W R - Ω|)`.
fn gram_reduce(omega: &Matrix, dpi: &Matrix, v: &Matrix) -> Result<(Matrix, f64)> {
    let m = dpi.nrows();
    let big_omega = v.transpose() * omega * v;
    if m == 0 {
        return Ok((Matrix::zeros(0, 0), max_abs(&big_omega)));
    }
    let r = dpi * v;
    if numerical_rank(&r, RANK_REL_TOL) != m {
        return Err(Error::Validation(format!(
            "projection is not a submersion on the level-set tangent (rank {} < {m})",
            numerical_rank(&r, RANK_REL_TOL)
        )));
    }
    let pinv = r
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::Validation(e.to_string()))?;
    let w = pinv.transpose() * &big_omega * &pinv;
    let w = (&w - w.transpose()) * 0.5;
    let residual = max_abs(&(r.transpose() * &w * &r - &big_omega));
    Ok((w, residual))
}

/// The reduced form at a reduced point, computed at its section lift.
pub fn reduced_form_at(
    e: &CharacteristicDistribution,
    chart: &ReducedChart,
    y: &Vector,
) -> Result<Matrix> {
    let z = chart.section.eval(y);
    reduced_form_from(e, chart, &z).map(|(w, _)| w)
}

fn reduced_form_from(
    e: &CharacteristicDistribution,
    chart: &ReducedChart,
    z: &Vector,
) -> Result<(Matrix, f64)> {
    let omega = e.poisson().require_form(z)?;
    let dpi = chart.projection.jacobian(z)?;
    gram_reduce(&omega, &dpi, e.fiber(z).basis())
}

/// Reduced Poisson tensor `-W⁻¹` at a reduced point.
pub fn reduced_tensor_at(
    e: &CharacteristicDistribution,
    chart: &ReducedChart,
    y: &Vector,
) -> Result<Matrix> {
    let w = reduced_form_at(e, chart, y)?;
    if w.nrows() == 0 {
        return Ok(w);
    }
    let inv = w
        .try_inverse()
        .ok_or_else(|| Error::Validation("reduced form is degenerate".into()))?;
    Ok(-inv)
}

/// Results of validating a reduced chart.
#[derive(Clone, Debug)]
pub struct ReducedFormReport {
    pub dim: usize,
    /// `max |Rᵀ W R - Ω|` over lifts.
    pub defining_residual: CheckReport,
    /// `max |W(z) - W(g z)|` and `|π(z) - π(g z)|` over pairs of lifts.
    pub well_defined: CheckReport,
    /// Condition number of `W`; 1 for a zero-dimensional space.
    pub nondegenerate: CheckReport,
    pub min_singular: f64,
    /// `(π(z), W)` at each probe.
    pub samples: Vec<(Vector, Matrix)>,
}

impl ReducedFormReport {
    pub fn passed(&self) -> bool {
        self.defining_residual.passed && self.well_defined.passed && self.nondegenerate.passed
    }

    pub fn reports(&self) -> Vec<CheckReport> {
        vec![
            self.defining_residual.clone(),
            self.well_defined.clone(),
            self.nondegenerate.clone(),
        ]
    }
}

/// Construct and validate `ω_ρ` at level-set probes, each paired with a
/// second lift `g·z` for a sampled `g ∈ G_ρ`.
pub fn reduced_form(
    e: &CharacteristicDistribution,
    level: &LevelSetModel,
    chart: &ReducedChart,
    g_rho: &GroupAction,
    probes: &Probes,
    tol: f64,
    tol_nondeg: f64,
) -> Result<ReducedFormReport> {
    let mut defining = CheckReport::new("reduced.defining_relation", tol);
    let mut well = CheckReport::new("reduced.well_defined", tol);
    let mut nondeg = CheckReport::new("reduced.nondegenerate", 1.0 / tol_nondeg);
    let mut rng = probes.rng();
    let mut samples = Vec::with_capacity(probes.count);
    let mut min_singular = f64::INFINITY;
    for _ in 0..probes.count {
        let z = level.sample_point(&mut rng);
        let g = g_rho.sample(&mut rng);
        let z2 = g_rho.act(&g, &z);
        let (w, res) = reduced_form_from(e, chart, &z)?;
        let (w2, res2) = reduced_form_from(e, chart, &z2)?;
        defining.record(res.max(res2));
        let y = chart.projection.eval(&z);
        let y2 = chart.projection.eval(&z2);
        well.record(max_abs(&(&w - &w2)).max((&y - &y2).amax()));
        if chart.dim == 0 {
            nondeg.record(1.0);
        } else {
            let (smin, smax) = singular_extremes(&w);
            min_singular = min_singular.min(smin);
            nondeg.record(if smin > 0.0 {
                smax / smin
            } else {
                f64::INFINITY
            });
        }
        samples.push((y, w));
    }
    Ok(ReducedFormReport {
        dim: chart.dim,
        defining_residual: defining,
        well_defined: well,
        nondegenerate: nondeg,
        min_singular,
        samples,
    })
}

/// Antisymmetrized derivative residual of `ω_ρ` at sampled reduced points.
pub fn check_reduced_closed(
    e: &CharacteristicDistribution,
    level: &LevelSetModel,
    chart: &ReducedChart,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("reduced.closed", tol);
    if chart.dim < 2 {
        report.note("reduced chart has dimension below 2");
        return Ok(report);
    }
    for z in level.points(probes) {
        let y = chart.projection.eval(&z);
        let form = |x: &Vector| {
            reduced_form_at(e, chart, x)
                .unwrap_or_else(|_| Matrix::from_element(chart.dim, chart.dim, f64::NAN))
        };
        report.record(exterior_derivative_residual_with_step(&form, &y, 1e-4));
    }
    Ok(report)
}

/// Validate a declared `G_ρ`: it preserves the level set, and
/// `T_z(G_ρ·z) = T_z 𝒥⁻¹(ρ) ∩ T_z(G·z)`.
pub fn isotropy_of_label(
    e: &CharacteristicDistribution,
    level: &LevelSetModel,
    g_rho: &GroupAction,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("reduced.label_isotropy", tol);
    let mut rng = probes.rng();
    for _ in 0..probes.count {
        let z = level.sample_point(&mut rng);
        let g = g_rho.sample(&mut rng);
        let moved = label_distance(e, &label_at(e, &g_rho.act(&g, &z))?, &level.label)?;
        let lhs = orbit_tangent(g_rho, &z);
        let rhs = e.fiber(&z).intersection(&orbit_tangent(e.action(), &z));
        report.record(moved.max(lhs.max_angle(&rhs)));
    }
    Ok(report)
}

fn reduced_hamiltonian(chart: &ReducedChart, h: &SmoothMap) -> SmoothMap {
    h.compose(&chart.section)
        .renamed(format!("{}_reduced", h.name()))
}

fn reduced_field(
    e: &CharacteristicDistribution,
    chart: &ReducedChart,
    h_rho: &SmoothMap,
    y: &Vector,
) -> Vector {
    match (reduced_tensor_at(e, chart, y), h_rho.gradient(y)) {
        (Ok(b), Ok(g)) => b * g,
        _ => Vector::from_element(y.len(), f64::NAN),
    }
}

fn require_tag(e: &CharacteristicDistribution, h: &SmoothMap) -> Result<()> {
    if h.invariance_tag() == Some(e.action().name()) {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "`{}` is not tagged invariant under `{}`",
            h.name(),
            e.action().name()
        )))
    }
}

/// Checkpoints inside `[0, t]` at which projected and reduced flows are compared.
pub const COMMUTE_CHECKPOINTS: usize = 4;

/// `π(F_t(z))` against `F^ρ_t(π(z))`.
pub fn reduce_dynamics(
    e: &CharacteristicDistribution,
    level: &LevelSetModel,
    chart: &ReducedChart,
    h: &SmoothMap,
    t: f64,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    require_tag(e, h)?;
    let up = hamiltonian_vector_field(e.poisson(), h)?;
    let h_rho = reduced_hamiltonian(chart, h);
    let down = |y: &Vector| reduced_field(e, chart, &h_rho, y);
    let upf = |z: &Vector| up.eval(z);
    let ctrl = StepControl::default();
    let mut report = CheckReport::new("reduced.flow_commutes", tol);
    let dt = t / COMMUTE_CHECKPOINTS as f64;
    for z in level.points(probes) {
        let (mut zu, mut yd) = (z.clone(), chart.projection.eval(&z));
        let mut worst = (chart.projection.eval(&zu) - &yd).amax();
        if t != 0.0 {
            for _ in 0..COMMUTE_CHECKPOINTS {
                zu = ode::integrate(&upf, &zu, dt, &ctrl, None)?.end;
                yd = ode::integrate(&down, &yd, dt, &ctrl, None)?.end;
                worst = worst.max((chart.projection.eval(&zu) - &yd).amax());
            }
        }
        report.record(worst);
    }
    Ok(report)
}

/// Drift of `h_ρ` along the reduced flow.
pub fn check_reduced_energy(
    e: &CharacteristicDistribution,
    level: &LevelSetModel,
    chart: &ReducedChart,
    h: &SmoothMap,
    horizon: f64,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    require_tag(e, h)?;
    let h_rho = reduced_hamiltonian(chart, h);
    let down = |y: &Vector| reduced_field(e, chart, &h_rho, y);
    let mut report = CheckReport::new("reduced.energy", tol);
    for z in level.points(probes) {
        let y = chart.projection.eval(&z);
        let end = ode::integrate(&down, &y, horizon, &StepControl::default(), None)?.end;
        report.record((h_rho.value(&end) - h_rho.value(&y)).abs());
    }
    Ok(report)
}

/// `{h, k}` upstairs against `{h_ρ, k_ρ}` computed with `-W⁻¹` downstairs.
pub fn reduced_bracket_check(
    e: &CharacteristicDistribution,
    level: &LevelSetModel,
    chart: &ReducedChart,
    h: &SmoothMap,
    k: &SmoothMap,
    probes: &Probes,
    tol: f64,
) -> Result<CheckReport> {
    require_tag(e, h)?;
    require_tag(e, k)?;
    let (h_rho, k_rho) = (reduced_hamiltonian(chart, h), reduced_hamiltonian(chart, k));
    let mut report = CheckReport::new("reduced.bracket", tol);
    for z in level.points(probes) {
        let up = bracket_at(e.poisson(), h, k, &z)?;
        let y = chart.projection.eval(&z);
        let down = if chart.dim == 0 {
            0.0
        } else {
            let b = reduced_tensor_at(e, chart, &y)?;
            h_rho.gradient(&y)?.dot(&(b * k_rho.gradient(&y)?))
        };
        report.record((up - down).abs() / up.abs().max(1.0));
    }
    Ok(report)
}

/// Long random words from level-set points stay on the level set.
pub fn check_level_set_closed(
    e: &CharacteristicDistribution,
    level: &LevelSetModel,
    probes: &Probes,
    sampler: &WordSampler,
    tol: f64,
) -> Result<CheckReport> {
    let mut report = CheckReport::new("level_set.closed", tol);
    let mut rng = probes.rng();
    for _ in 0..probes.count {
        let z = level.sample_point(&mut rng);
        let w = sampler.sample(e.base(), &mut rng);
        if let Ok((end, _)) =
            crate::distribution::apply_flow_word_recorded(e.base(), &w, &z, &StepControl::default())
        {
            report.record(label_distance(e, &label_at(e, &end)?, &level.label)?);
        }
    }
    Ok(report)
}

/// The Marsden–Weinstein side of the comparison: the level `J = μ`, its
/// chart, and the declared diffeomorphism from MW coordinates to optimal
/// reduced coordinates.
#[derive(Clone, Debug)]
pub struct MwSetup {
    pub mu: Vector,
    pub chart: ReducedChart,
    pub to_optimal: SmoothMap,
}

/// Tangent of `J⁻¹(μ) ∩ M_H` at `z`, `H = G_z`.
fn mw_tangent(
    e: &CharacteristicDistribution,
    j: &ClassicalMomentumMap,
    z: &Vector,
) -> Result<Subspace> {
    let n = z.len();
    let kernel = if j.dim() == 0 {
        Subspace::full(n)
    } else {
        let jac = j.jacobian(z)?;
        if max_abs(&jac) == 0.0 {
            Subspace::full(n)
        } else {
            Subspace::span(&null_space(&jac, RANK_REL_TOL))
        }
    };
    Ok(kernel.intersection(&fixed_tangent(e.action(), &isotropy_at(e.action(), z))))
}

/// Outcome of the optimal/MW comparison.
#[derive(Clone, Debug)]
pub struct MwComparison {
    pub optimal_dim: usize,
    pub mw_dim: usize,
    /// `|J(z) - μ|` over the level-set probes.
    pub level: CheckReport,
    /// `|Dφᵀ W_ρ(φ(y)) Dφ - W_μ(y)|` at projected probes.
    pub form: CheckReport,
}

impl MwComparison {
    pub fn passed(&self) -> bool {
        self.optimal_dim == self.mw_dim && self.level.passed && self.form.passed
    }
}

/// Build `ω_μ` on `(J⁻¹(μ) ∩ M_H)/N(H)` from the same Gram construction
/// applied to the tangent of `J⁻¹(μ) ∩ M_H`, and pull the optimal reduced
/// form back through the declared diffeomorphism.
pub fn mw_reduce_compare(
    e: &CharacteristicDistribution,
    j: &ClassicalMomentumMap,
    level: &LevelSetModel,
    optimal: &ReducedChart,
    mw: &MwSetup,
    probes: &Probes,
    tol: f64,
) -> Result<MwComparison> {
    if !e.action().is_proper() {
        return Err(Error::Precondition(format!(
            "action `{}` is not declared proper",
            e.action().name()
        )));
    }
    if j.dim() != mw.mu.len() {
        return Err(Error::DimensionMismatch {
            expected: j.dim(),
            found: mw.mu.len(),
        });
    }
    let mut level_report = CheckReport::new("mw.level", tol);
    let mut form_report = CheckReport::new("mw.form", tol);
    let mut rng = probes.rng();
    for _ in 0..probes.count {
        let z = level.sample_point(&mut rng);
        level_report.record(if j.dim() == 0 {
            0.0
        } else {
            (j.value(&z) - &mw.mu).amax()
        });
        let omega = e.poisson().require_form(&z)?;
        let tangent = mw_tangent(e, j, &z)?;
        let (w_mu, res) = gram_reduce(&omega, &mw.chart.projection.jacobian(&z)?, tangent.basis())?;
        let y = mw.chart.projection.eval(&z);
        let worst = if mw.chart.dim == 0 {
            res
        } else {
            let phi = mw.to_optimal.jacobian(&y)?;
            let w_rho = reduced_form_at(e, optimal, &mw.to_optimal.eval(&y))?;
            max_abs(&(phi.transpose() * w_rho * &phi - w_mu)).max(res)
        };
        form_report.record(worst);
    }
    let z0 = level.sample_point(&mut probes.rng());
    Ok(MwComparison {
        optimal_dim: optimal.dim,
        mw_dim: mw_tangent(e, j, &z0)?.dim() - orbit_tangent_fixed_dim(e, &z0),
        level: level_report,
        form: form_report,
    })
}

/// Dimension of the orbit of `N(H)` through `z` inside `M_H`, which is the
/// part of the group orbit tangent to the fixed subspace.
fn orbit_tangent_fixed_dim(e: &CharacteristicDistribution, z: &Vector) -> usize {
    let iso = isotropy_at(e.action(), z);
    orbit_tangent(e.action(), z)
        .intersection(&fixed_tangent(e.action(), &iso))
        .dim()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_reduction_of_a_plane() {
        // ω = dx∧dy on R², projection = identity
        let omega = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let (w, res) =
            gram_reduce(&omega, &Matrix::identity(2, 2), &Matrix::identity(2, 2)).unwrap();
        assert!(max_abs(&(w - &omega)) < 1e-15 && res < 1e-15);
    }

    #[test]
    fn zero_dimensional_reduction_is_vacuous() {
        let omega = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let v = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let (w, res) = gram_reduce(&omega, &Matrix::zeros(0, 2), &v).unwrap();
        assert_eq!(w.shape(), (0, 0));
        assert_eq!(res, 0.0);
    }

    #[test]
    fn non_submersive_projection_is_rejected() {
        let omega = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let v = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let dpi = Matrix::from_row_slice(1, 2, &[0.0, 1.0]);
        assert!(matches!(
            gram_reduce(&omega, &dpi, &v),
            Err(Error::Validation(_))
        ));
    }
}
