use thiserror::Error;

/// Errors raised by the analytic models, the sampler and the command layer.
#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside its physical range, e.g. a reflectivity above 1.
    #[error("domain error: {0}")]
    Domain(String),

    /// A ratio whose denominator vanishes (both arm powers zero, no wins, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Detector flags do not follow the presence rules of the protocol branch.
    #[error("malformed run flags: {0}")]
    MalformedFlags(String),

    /// A computed probability left [0, 1] by more than rounding error.
    #[error("probability out of range: {0}")]
    OutOfRange(String),

    #[error("no runs: {0}")]
    NoRuns(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the `wcf` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(std::io::Error::other(err))
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Io(std::io::Error::other(err))
    }
}

/// Absolute slack tolerated when clamping a computed probability into [0, 1].
pub const CLAMP_TOLERANCE: f64 = 1e-12;

pub(crate) fn check_unit(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::Domain(format!("{name} = {value} is outside [0, 1]")));
    }
    Ok(())
}

/// Clamps `value` into [0, 1] when it overshoots by at most [`CLAMP_TOLERANCE`].
pub(crate) fn clamp_probability(name: &str, value: f64) -> Result<f64> {
    if !(-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&value) {
        return Err(Error::OutOfRange(format!("{name} = {value}")));
    }
    Ok(value.clamp(0.0, 1.0))
}
