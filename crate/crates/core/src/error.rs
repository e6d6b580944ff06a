use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("director is not a unit vector (|u| = {norm})")]
    NonUnitDirector { norm: f64 },

    #[error("tensor violates S0 membership: {0}")]
    NotInS0(String),

    #[error("matrix is not a proper rotation: {0}")]
    NotARotation(String),

    #[error("tensor lies outside S_delta (distance {distance:.3e}, top eigenvalue gap {gap:.3e})")]
    OutsideSDelta { distance: f64, gap: f64 },

    #[error("field value at point {index} is {distance:.3e} away from the uniaxial manifold")]
    OffManifold { index: usize, distance: f64 },

    #[error("invalid material constants: {0}")]
    Material(String),

    #[error("coercivity condition violated: {0}")]
    Coercivity(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("grid mismatch between fields")]
    GridMismatch,

    #[error("config error in key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("non-finite value in {field} at t = {t}, step {step}")]
    NonFinite { field: &'static str, t: f64, step: usize },

    #[error("picard iteration failed to contract after {halvings} step halvings (last ratio {ratio:.3})")]
    PicardDiverged { halvings: u32, ratio: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("unknown check `{0}`")]
    UnknownCheck(String),

    #[error("no check matches `{0}`")]
    NoMatch(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
