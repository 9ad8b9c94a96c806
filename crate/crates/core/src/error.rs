use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library. Messages are prefixed with the
/// module that raised them so CLI diagnostics can be traced back.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh: parse error in {path} at line {line}: {msg}")]
    MeshParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("mesh: unsupported element type {0}; only linear triangles and tetrahedra are accepted")]
    UnsupportedElement(String),
    #[error("mesh: element {element} is degenerate (signed measure {measure:e})")]
    DegenerateElement { element: usize, measure: f64 },
    #[error("mesh: invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("xform: value {value} outside the admissible range of the {kind} transform")]
    TransformDomain { kind: &'static str, value: f64 },
    #[error("xform: the logistic transform cannot carry a nonzero reaction rate (mu_r = {0})")]
    UnsupportedTransform(f64),

    #[error("models: {0}")]
    Model(String),

    #[error("morphology: degenerate shape tensor ({0})")]
    DegenerateTensor(String),
    #[error("morphology: shape tensor lost positive definiteness at t = {t:e}; reduce dt")]
    Instability { t: f64 },
    #[error("morphology: distortion {0} too close to 1, effective stress is singular")]
    Saturation(f64),

    #[error("femcore: stagnation: steady tau undefined for zero velocity")]
    Stagnation,
    #[error("femcore: dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("solver: linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("solver: singular matrix or zero pivot (row {0})")]
    Singular(usize),
    #[error("solver: {0}")]
    Solver(String),

    #[error("postproc: sample line does not intersect the mesh")]
    NoIntersection,
    #[error("postproc: zero net flux through boundary '{0}'")]
    ZeroFlux(String),

    #[error("config: parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },
    #[error("config: invalid key '{key}': {msg}")]
    ConfigInvalid { key: String, msg: String },

    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("io: {path}: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// Process exit code for this error: 2 config, 3 numerical, 4 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigParse { .. } | Error::ConfigInvalid { .. } => 2,
            Error::Io { .. }
            | Error::Format { .. }
            | Error::MeshParse { .. }
            | Error::UnsupportedElement(_) => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
