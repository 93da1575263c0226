use thiserror::Error;

/// Errors produced while building spaces, assembling systems or running studies.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameter {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("representation failed: {0}")]
    RepresentationFailure(String),

    #[error("malformed domain file: {0}")]
    MalformedDomain(String),

    #[error("patch {patch} is not strictly convex")]
    NonConvexPatch { patch: usize },

    #[error("patch {patch} is clockwise; corners must be listed counterclockwise")]
    ClockwisePatch { patch: usize },

    #[error("inconsistent edge matching: {0}")]
    InconsistentEdge(String),

    #[error("T-junction: corner {corner} of patch {patch} lies inside an edge of patch {other}")]
    TJunction {
        patch: usize,
        corner: usize,
        other: usize,
    },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("point ({0}, {1}) not found in patch")]
    NotFound(f64, f64),

    #[error("invalid interface {interface}: {reason}")]
    InvalidInterface { interface: usize, reason: String },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("numerically ambiguous rank at vertex {vertex}: singular value ratio {ratio:e}")]
    RankAmbiguity { vertex: usize, ratio: f64 },

    #[error("unsupported refinement: {0}")]
    UnsupportedRefinement(String),

    #[error("quadrature degeneracy on patch {patch}: det J = {det:e}")]
    QuadratureDegeneracy { patch: usize, det: f64 },

    #[error("iterative solver failed after {iterations} iterations (relative residual {residual:e})")]
    IterativeFailure { iterations: usize, residual: f64 },

    #[error("matrix is not symmetric positive definite (curvature {0:e})")]
    NotSpd(f64),

    #[error("eigenvalue estimation failed: {0}")]
    EstimationFailure(String),

    #[error("relative H{0} error undefined: exact solution has zero norm")]
    UndefinedRelativeError(usize),

    #[error("unknown solution id {0:?}")]
    UnknownSolution(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
