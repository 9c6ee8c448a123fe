use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("control {0} outside [0, 1]")]
    ControlOutOfRange(f64),

    #[error("smoothing scale must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("state ({x1}, {x2}) lies outside the state box")]
    OutOfBox { x1: f64, x2: f64 },

    #[error("horizon {0} is outside the supported range")]
    InvalidHorizon(usize),

    #[error("near-singular QP system (relative residual {residual:e})")]
    NearSingular { residual: f64 },

    #[error("non-finite value at stage {stage}")]
    NonFinite { stage: usize },

    #[error("instance too large for enumeration: {0} policies")]
    OversizedInstance(f64),

    #[error("weather input: {0}")]
    Weather(String),

    #[error("weather input line {line}: {msg}")]
    WeatherLine { line: usize, msg: String },

    #[error("storm pulses overlap: [{0}, {1}) and [{2}, {3})")]
    OverlappingPulses(f64, f64, f64, f64),

    #[error("at step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_step(self, index: usize) -> Self {
        Error::Step {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
