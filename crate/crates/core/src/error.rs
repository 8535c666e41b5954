use thiserror::Error;

/// Failure modes shared by every solver in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid input value (non-finite, out of range, inadmissible template).
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    /// No monotone semi-wave exists at this speed.
    #[error("no semi-wave for speed {speed} (KPP speed {kpp})")]
    NoSemiWave { speed: f64, kpp: f64 },

    /// The Dirichlet problem has no positive solution (principal eigenvalue >= 0).
    #[error("no positive solution: principal eigenvalue {lambda1} >= 0")]
    NoPositiveSolution { lambda1: f64 },

    /// Integrator, Newton, bisection or bracket failure.
    #[error("numerics error: {0}")]
    Numerics(String),

    /// A single time step was rejected; retry with `suggested_dt`.
    #[error("step rejected ({reason}); suggested dt {suggested_dt:e}")]
    StepRejected { reason: String, suggested_dt: f64 },

    /// Trajectory too short for the classification policy.
    #[error("horizon {got} shorter than required {required}")]
    Horizon { got: f64, required: f64 },

    /// Empty evaluation window for interior asymptotics.
    #[error("empty window: {0}")]
    Window(String),

    /// The bracket expansion cap was reached without a spreading probe.
    #[error("no spreading up to sigma = {sigma_cap} (sigma_0 = +inf for this configuration)")]
    SigmaInfinite { sigma_cap: f64 },

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// Numerics-class failures as opposed to bad input.
    pub fn is_numerics(&self) -> bool {
        matches!(self, Error::Numerics(_) | Error::StepRejected { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
