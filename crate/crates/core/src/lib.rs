//! Numerical toolkit for optimal momentum maps on flat phase-space charts.
//!
//! The crate computes characteristic distributions of canonical group
//! actions, integrates their orbits, evaluates optimal momentum labels, and
//! carries out optimal and Marsden–Weinstein symplectic reduction on a set
//! of self-validating scenarios.

pub mod checks;
pub mod distribution;
pub mod error;
pub mod expr;
pub mod group_action;
pub mod linalg;
pub mod ode;
pub mod optimal_momentum;
pub mod phase_space;
pub mod reduction;
pub mod report;
pub mod scenario_file;
pub mod scenarios;
pub mod tolerances;

pub use error::{Error, Result};
