use thiserror::Error;

/// Errors raised across the reference, surface, flow and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("charge |e| = {e} exceeds mass m = {m}; no horizon exists")]
    ExtremalViolation { m: f64, e: f64 },
    #[error("invalid tabulated reference: {0}")]
    InvalidTable(String),
    #[error("radius r = {r} is at or inside the horizon r_h = {r_horizon}")]
    InsideHorizon { r: f64, r_horizon: f64 },
    #[error("radius {value} lies outside the represented range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("integrator failed: {0}")]
    Integrator(String),
    #[error("surface is not immersed: {0}")]
    NotImmersed(String),
    #[error("surface lost star-shapedness at s = {s}")]
    LostStarShape { s: f64 },
    #[error("nonpositive mean curvature {value} at grid point {index}")]
    NonPositiveMeanCurvature { index: usize, value: f64 },
    #[error("nonpositive u = {value} at grid point {index}")]
    NonPositiveU { index: usize, value: f64 },
    #[error("foliation hypothesis failed on slice {slice}: {what}")]
    HypothesisFailure { slice: usize, what: String },
    #[error("substep did not converge at s = {s}: {why}")]
    NonConvergentSubstep { s: f64, why: String },
    #[error("need at least {needed} slices, have {have}")]
    InsufficientSlices { needed: usize, have: usize },
    #[error("step budget of {0} exhausted")]
    MaxStepsExceeded(usize),
    #[error("extrapolation tail not asymptotic: {0}")]
    TailNotAsymptotic(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
