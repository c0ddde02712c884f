use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("phase dimension must be even and positive, got {0}")]
    OddDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("derivative of order {order} not supported for this ramp (max {max})")]
    UnsupportedDerivativeOrder { order: usize, max: usize },

    #[error("series order {order} exceeds the cap {max}")]
    SeriesOrderTooHigh { order: usize, max: usize },

    #[error("integration diverged at step {step} (t = {t})")]
    Divergence { step: usize, t: f64 },

    #[error("nudging cycle {cycle}: {source}")]
    Cycle {
        cycle: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("mode k = {k} is too close to resonance at eps = {eps} (|k eps - 1| < 0.1)")]
    Resonance { k: i32, eps: f64 },

    #[error("Newton iteration did not converge in {iterations} steps (best residual {best_residual:e})")]
    NewtonNotConverged {
        iterations: usize,
        best_residual: f64,
    },

    #[error("singular shooting Jacobian")]
    SingularJacobian,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("sweep mixes ramp families; use only polynomial or only exponential ramps")]
    MixedRampFamilies,

    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(input: &str, reason: impl Into<String>) -> Self {
        Error::Parse {
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}
