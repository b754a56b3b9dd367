use thiserror::Error;

/// Errors produced by the de-rendering library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quaternion is not unit-norm (|q| = {norm})")]
    NonUnitQuaternion { norm: f64 },
    #[error("point {index} lies at z = {z}, not in front of the near plane {near}")]
    BehindNearPlane { index: usize, z: f64, near: f64 },
    #[error("pixel ({x}, {y}) maps to a ray that does not point forward")]
    RayNotForward { x: f64, y: f64 },
    #[error("vertex {index} lies outside the rest bounding box of the lattice")]
    OutsideLattice { index: usize },
    #[error("object behind camera")]
    ObjectBehindCamera,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid object state: {0}")]
    InvalidState(String),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("fit aborted at iteration {iteration}: {source}")]
    FitAborted {
        iteration: u32,
        partial_trace: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
    #[error("non-finite loss at iteration {0}")]
    Divergence(usize),
    #[error("unknown object id {0}")]
    UnknownObject(u32),
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("object {id}: {source}")]
    Object {
        id: u32,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
