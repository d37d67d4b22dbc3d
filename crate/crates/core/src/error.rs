use crate::mathieu::Axis;

/// Errors produced anywhere in the solve → fit → integrate → transform pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("Laplace solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("point ({x:.4e}, {y:.4e}, {z:.4e}) m is outside the grid box")]
    OutsideGrid { x: f64, y: f64, z: f64 },

    #[error("point ({x:.4e}, {y:.4e}, {z:.4e}) m lies inside an electrode")]
    InsideElectrode { x: f64, y: f64, z: f64 },

    #[error("only {found} sample nodes inside the fit region (need at least {required})")]
    TooFewSamples { found: usize, required: usize },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("unstable motion: {0}")]
    Unstable(String),

    #[error("ion escaped along {axis} at t = {time:.6e} s")]
    Escaped { axis: Axis, time: f64 },

    #[error("non-finite state at integration step {step}")]
    NumericFailure { step: usize },

    #[error("no spectral peak found below {limit:.1} Hz")]
    NoPeak { limit: f64 },

    #[error("malformed grid dump: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
