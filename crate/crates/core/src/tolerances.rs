//! Default numerical tolerances.
//!
//! Named values can be overridden at run time through [`Tolerances::set`],
//! which is what the command-line `--tol NAME=VAL` flag uses.

use crate::error::{Error, Result};

/// Antisymmetry residual of a Poisson tensor.
pub const TOL_ANTISYM: f64 = 1e-10;
/// Invariance residual `|f(g.z) - f(z)|`, action axioms, inverse checks.
pub const TOL_INV: f64 = 1e-10;
/// Jacobi identity residual (finite-difference derivatives of the tensor).
pub const TOL_JACOBI: f64 = 1e-8;
/// Relative agreement of analytic and finite-difference derivatives.
pub const TOL_FD: f64 = 1e-5;
/// Largest principal angle for subspace equality.
pub const TOL_ANGLE: f64 = 1e-6;
/// Orbit steering stops once the chart distance to the target is below this.
pub const TOL_REACH: f64 = 1e-6;
/// Projected and reduced flows must agree to this.
pub const TOL_COMMUTE: f64 = 1e-5;
/// Relative smallest singular value required of a reduced form.
pub const TOL_NONDEG: f64 = 1e-8;
/// Drift of conserved quantities along integrated flows.
pub const TOL_NOETHER: f64 = 1e-8;
/// Energy drift along symplectic flows.
pub const TOL_ENERGY: f64 = 1e-8;
/// Pushforward angle in the involutivity test (flow Jacobians by differences).
pub const TOL_INVOLUTIVE: f64 = 1e-5;
/// Residual of the reduced-form defining relation and lift independence.
pub const TOL_REDUCED_FORM: f64 = 1e-6;
/// Closedness of reduced forms (differences of numerically built forms).
pub const TOL_CLOSED: f64 = 1e-5;
/// Residual for Poisson-map and canonical-action identities.
pub const TOL_MAP: f64 = 1e-7;
/// Default relative tolerance of the adaptive integrator.
pub const FLOW_RTOL: f64 = 1e-10;
/// Default absolute tolerance of the adaptive integrator.
pub const FLOW_ATOL: f64 = 1e-12;

/// A mutable set of named tolerances, initialised to the defaults above.
#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub antisym: f64,
    pub inv: f64,
    pub jacobi: f64,
    pub fd: f64,
    pub angle: f64,
    pub reach: f64,
    pub commute: f64,
    pub nondeg: f64,
    pub noether: f64,
    pub energy: f64,
    pub involutive: f64,
    pub reduced_form: f64,
    pub closed: f64,
    pub map: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            antisym: TOL_ANTISYM,
            inv: TOL_INV,
            jacobi: TOL_JACOBI,
            fd: TOL_FD,
            angle: TOL_ANGLE,
            reach: TOL_REACH,
            commute: TOL_COMMUTE,
            nondeg: TOL_NONDEG,
            noether: TOL_NOETHER,
            energy: TOL_ENERGY,
            involutive: TOL_INVOLUTIVE,
            reduced_form: TOL_REDUCED_FORM,
            closed: TOL_CLOSED,
            map: TOL_MAP,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 14] = [
        "antisym",
        "inv",
        "jacobi",
        "fd",
        "angle",
        "reach",
        "commute",
        "nondeg",
        "noether",
        "energy",
        "involutive",
        "reduced_form",
        "closed",
        "map",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "antisym" => &mut self.antisym,
            "inv" => &mut self.inv,
            "jacobi" => &mut self.jacobi,
            "fd" => &mut self.fd,
            "angle" => &mut self.angle,
            "reach" => &mut self.reach,
            "commute" => &mut self.commute,
            "nondeg" => &mut self.nondeg,
            "noether" => &mut self.noether,
            "energy" => &mut self.energy,
            "involutive" => &mut self.involutive,
            "reduced_form" => &mut self.reduced_form,
            "closed" => &mut self.closed,
            "map" => &mut self.map,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Parse(format!(
                "tolerance `{name}` must be positive, got {value}"
            )));
        }
        let slot = self.slot(name).ok_or_else(|| Error::Unknown {
            kind: "tolerance",
            name: name.to_string(),
        })?;
        *slot = value;
        Ok(())
    }

    /// Parse and apply a `NAME=VALUE` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected NAME=VALUE, got `{spec}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad tolerance value in `{spec}`")))?;
        self.set(name.trim(), value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_by_name() {
        let mut t = Tolerances::default();
        t.apply_override("angle=1e-3").unwrap();
        assert_eq!(t.angle, 1e-3);
        assert!(t.apply_override("bogus=1").is_err());
        assert!(t.apply_override("angle").is_err());
        assert!(t.apply_override("angle=-1").is_err());
        for name in Tolerances::NAMES {
            assert!(t.clone().set(name, 0.5).is_ok(), "{name}");
        }
    }
}
