//! Adaptive Dormand–Prince 5(4) integration of autonomous vector fields.
//!
//! Accepted step sizes are recorded so a trajectory can be replayed with the
//! exact same step sequence from a perturbed start. Replays are smooth in the
//! initial condition, which is what finite-difference flow Jacobians need.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::tolerances::{FLOW_ATOL, FLOW_RTOL};

/// Dormand–Prince tableau.
mod dopri {
    pub const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    /// Fifth-order weights (first-same-as-last: equal to the last row of A).
    pub const B: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    /// Fourth-order embedded weights.
    pub const B_HAT: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
}

/// Error control for [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Largest step allowed, `None` for unbounded.
    pub max_step: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: FLOW_RTOL,
            atol: FLOW_ATOL,
            max_steps: 200_000,
            max_step: None,
        }
    }
}

impl StepControl {
    pub fn with_rtol(rtol: f64) -> Self {
        Self {
            rtol,
            atol: rtol * 1e-2,
            ..Self::default()
        }
    }
}

/// End state of an integration plus the accepted (signed) step sizes.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub end: Vector,
    pub steps: Vec<f64>,
}

fn stages<F>(field: &F, y: &Vector, k0: &Vector, h: f64) -> (Vec<Vector>, Vector)
where
    F: Fn(&Vector) -> Vector + ?Sized,
{
    let mut k: Vec<Vector> = Vec::with_capacity(7);
    k.push(k0.clone());
    for s in 1..7 {
        let mut arg = y.clone();
        for (j, kj) in k.iter().enumerate() {
            let a = dopri::A[s][j];
            if a != 0.0 {
                arg.axpy(h * a, kj, 1.0);
            }
        }
        k.push(field(&arg));
    }
    let mut y_new = y.clone();
    for (j, kj) in k.iter().enumerate() {
        if dopri::B[j] != 0.0 {
            y_new.axpy(h * dopri::B[j], kj, 1.0);
        }
    }
    (k, y_new)
}

fn error_norm(k: &[Vector], y: &Vector, y_new: &Vector, h: f64, ctrl: &StepControl) -> f64 {
    let n = y.len();
    if n == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let mut e = 0.0;
        for (j, kj) in k.iter().enumerate() {
            e += (dopri::B[j] - dopri::B_HAT[j]) * kj[i];
        }
        let scale = ctrl.atol + ctrl.rtol * y[i].abs().max(y_new[i].abs());
        acc += (h * e / scale).powi(2);
    }
    (acc / n as f64).sqrt()
}

fn initial_step(f0: &Vector, y0: &Vector, span: f64, ctrl: &StepControl) -> f64 {
    let scale = |v: f64| ctrl.atol + ctrl.rtol * v.abs();
    let n = y0.len().max(1) as f64;
    let d0 = (y0.iter().map(|&v| (v / scale(v)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0
        .iter()
        .zip(y0.iter())
        .map(|(&f, &v)| (f / scale(v)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h = h.min(span.abs());
    match ctrl.max_step {
        Some(m) => h.min(m),
        None => h,
    }
}

/// Integrate `dz/dt = field(z)` from `z0` for time `t` (negative allowed).
///
/// `domain` is checked after every accepted step; leaving it, or producing a
/// non-finite state, is a [`Error::DomainEscape`].
pub fn integrate<F>(
    field: &F,
    z0: &Vector,
    t: f64,
    ctrl: &StepControl,
    domain: Option<&dyn Fn(&Vector) -> bool>,
) -> Result<Trajectory>
where
    F: Fn(&Vector) -> Vector + ?Sized,
{
    if t == 0.0 {
        return Ok(Trajectory {
            end: z0.clone(),
            steps: Vec::new(),
        });
    }
    let dir = t.signum();
    let span = t.abs();
    let mut y = z0.clone();
    let mut k0 = field(&y);
    if k0.iter().any(|v| !v.is_finite()) {
        return Err(Error::DomainEscape { t: 0.0 });
    }
    // a field that vanishes at the start point is an equilibrium of an
    // autonomous system; skip straight to the end
    if k0.iter().all(|&v| v == 0.0) {
        return Ok(Trajectory {
            end: y,
            steps: Vec::new(),
        });
    }
    let mut h = initial_step(&k0, &y, span, ctrl);
    let mut elapsed = 0.0;
    let mut steps = Vec::new();
    let min_step = 1e-14 * span.max(1.0);
    for _ in 0..ctrl.max_steps {
        if elapsed >= span {
            return Ok(Trajectory { end: y, steps });
        }
        let last = span - elapsed <= h * (1.0 + 1e-12);
        if last {
            h = span - elapsed;
        }
        let (k, y_new) = stages(field, &y, &k0, dir * h);
        let finite = y_new.iter().all(|v| v.is_finite())
            && k.iter().all(|kj| kj.iter().all(|v| v.is_finite()));
        let err = if finite {
            error_norm(&k, &y, &y_new, dir * h, ctrl)
        } else {
            f64::INFINITY
        };
        if err <= 1.0 {
            if let Some(inside) = domain {
                if !inside(&y_new) {
                    return Err(Error::DomainEscape {
                        t: dir * (elapsed + h),
                    });
                }
            }
            elapsed = if last { span } else { elapsed + h };
            steps.push(dir * h);
            y = y_new;
            k0 = k[6].clone();
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 1.0)
            } else {
                0.1
            };
            h *= factor;
        }
        if let Some(m) = ctrl.max_step {
            h = h.min(m);
        }
        if h < min_step && elapsed < span {
            return Err(Error::Stiffness {
                t: dir * elapsed,
                h,
            });
        }
    }
    Err(Error::Stiffness {
        t: dir * elapsed,
        h,
    })
}

/// Re-run the fifth-order solution with a fixed step sequence.
pub fn replay<F>(field: &F, z0: &Vector, steps: &[f64]) -> Vector
where
    F: Fn(&Vector) -> Vector + ?Sized,
{
    let mut y = z0.clone();
    for &h in steps {
        let k0 = field(&y);
        let (_, y_new) = stages(field, &y, &k0, h);
        y = y_new;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation(z: &Vector) -> Vector {
        Vector::from_vec(vec![z[1], -z[0]])
    }

    #[test]
    fn zero_time_is_identity() {
        let z = Vector::from_vec(vec![1.0, 2.0]);
        let tr = integrate(&rotation, &z, 0.0, &StepControl::default(), None).unwrap();
        assert_eq!(tr.end, z);
    }

    #[test]
    fn harmonic_oscillator_full_period() {
        let z = Vector::from_vec(vec![0.3, -1.2]);
        let tr = integrate(
            &rotation,
            &z,
            2.0 * std::f64::consts::PI,
            &StepControl::default(),
            None,
        )
        .unwrap();
        assert!((tr.end - &z).norm() < 1e-8);
    }

    #[test]
    fn backward_integration_inverts_forward() {
        let z = Vector::from_vec(vec![0.3, -1.2]);
        let ctrl = StepControl::default();
        let fwd = integrate(&rotation, &z, 1.7, &ctrl, None).unwrap();
        let back = integrate(&rotation, &fwd.end, -1.7, &ctrl, None).unwrap();
        assert!((back.end - &z).norm() < 1e-9);
    }

    #[test]
    fn exponential_growth_matches_closed_form() {
        let f = |z: &Vector| z.clone();
        let z = Vector::from_vec(vec![1.0]);
        let tr = integrate(&f, &z, 2.0, &StepControl::default(), None).unwrap();
        assert!((tr.end[0] - 2.0f64.exp()).abs() < 1e-8 * 2.0f64.exp());
    }

    #[test]
    fn replay_reproduces_end_point() {
        let z = Vector::from_vec(vec![0.3, -1.2]);
        let tr = integrate(&rotation, &z, 1.3, &StepControl::default(), None).unwrap();
        assert_eq!(replay(&rotation, &z, &tr.steps), tr.end);
    }

    #[test]
    fn domain_escape_is_reported() {
        let f = |_: &Vector| Vector::from_vec(vec![1.0]);
        let inside = |z: &Vector| z[0] < 0.5;
        let err = integrate(
            &f,
            &Vector::from_vec(vec![0.0]),
            1.0,
            &StepControl::default(),
            Some(&inside),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DomainEscape { .. }));
    }

    #[test]
    fn blow_up_is_stiffness_or_escape() {
        // z' = z^2 explodes at t = 1
        let f = |z: &Vector| Vector::from_vec(vec![z[0] * z[0]]);
        let err = integrate(
            &f,
            &Vector::from_vec(vec![1.0]),
            2.0,
            &StepControl::default(),
            None,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Stiffness { .. } | Error::DomainEscape { .. }
        ));
    }
}
