use thiserror::Error;

/// Errors raised across the library. Each variant names the module-level
/// failure it reports so callers (and the CLI exit-code mapping) can tell a
/// bad input from a numerical breakdown.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("metric domain error at {point:?}: {reason}")]
    Domain { point: Vec<f64>, reason: String },

    #[error("matrix is singular (det = {det:e})")]
    Singular { det: f64 },

    #[error("hyperbolicity violated: {0}")]
    Hyperbolicity(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no real root on the {branch} branch at z = {z}")]
    BranchRange { branch: &'static str, z: f64 },

    #[error("level-set topology error: {0}")]
    Topology(String),

    #[error("curve geometry error: {0}")]
    Geometry(String),

    #[error("point {point:?} lies beyond the medial axis of the curve")]
    MedialAxis { point: Vec<f64> },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("path degeneracy at sigma = {sigma}: {reason}")]
    PathDegenerate { sigma: f64, reason: String },

    #[error("quadrature range error: {0}")]
    Range(String),

    #[error("CFL violation: dt = {dt:e} exceeds limit; use dt <= {suggested:e}")]
    Cfl { dt: f64, suggested: f64 },

    #[error("solution blew up (non-finite value) at t = {t}")]
    BlowUp { t: f64 },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
