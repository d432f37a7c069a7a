use thiserror::Error;

/// One Newton/IRLS iteration, kept so that convergence failures can be
/// diagnosed after the fact.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub objective: f64,
    pub max_step: f64,
    pub max_abs_coef: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular design: column(s) {columns:?} are collinear or constant")]
    SingularDesign { columns: Vec<String> },

    #[error("{solver} failed to converge after {} iteration(s)", trace.len())]
    Convergence {
        solver: &'static str,
        trace: Vec<IterationTrace>,
    },

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("positivity violation: fitted propensity {propensity:e} for record {record}")]
    Positivity { record: usize, propensity: f64 },

    #[error("exposure arm {arm} has no records")]
    EmptyArm { arm: u8 },

    #[error(
        "density grid captured mass {mass:.4} for arm {arm} (< {min_mass}); widen or refine the grid"
    )]
    InsufficientGrid { arm: u8, mass: f64, min_mass: f64 },

    #[error("bootstrap unstable: {failed} of {total} replicates failed")]
    BootstrapInstability { failed: usize, total: usize },

    #[error("relative bias undefined: true value is zero")]
    RelativeBiasUndefined,

    #[error("calibration failed: {0}")]
    Calibration(String),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
