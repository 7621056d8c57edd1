use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("chart mismatch: expected `{expected}`, found `{found}`")]
    ChartMismatch { expected: String, found: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "cannot differentiate `{0}`: no analytic derivative and finite differences are disabled"
    )]
    Differentiation(String),

    #[error("trajectory left the chart domain at t = {t}")]
    DomainEscape { t: f64 },

    #[error("flow word failed at letter {letter} (`{field}`): {source}")]
    PartialComposition {
        letter: usize,
        field: String,
        source: Box<Error>,
    },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    Stiffness { t: f64, h: f64 },

    #[error("operation requires a symplectic structure")]
    NotSymplectic,

    #[error("action is not globally Hamiltonian: {0}")]
    NotHamiltonian(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}
