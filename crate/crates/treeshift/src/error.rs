use thiserror::Error;

/// Errors raised by tree construction, operator evaluation and the checks built on them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed tree spec: {0}")]
    MalformedSpec(String),

    #[error("weight on vertex `{vertex}` must be positive and finite, got {weight}")]
    NonpositiveWeight { vertex: String, weight: f64 },

    #[error("unknown example `{0}` (expected T2, T4, UNILATERAL or RAYS)")]
    UnknownExample(String),

    #[error("bad example parameters: {0}")]
    BadParams(String),

    #[error("depth {depth} is too large for example {example} (cap {cap})")]
    DepthTooLargeForMemory {
        example: &'static str,
        depth: usize,
        cap: usize,
    },

    #[error("vertex `{descendant}` is not a descendant of `{ancestor}`")]
    NotDescendant { ancestor: String, descendant: String },

    #[error("unknown vertex label `{0}`")]
    UnknownVertex(String),

    #[error("vector support reaches generation {generation}; the result would leave the depth-{depth} truncation")]
    SupportOverflow { generation: usize, depth: usize },

    #[error("shift is not left-invertible on the truncation (lower bound {lower_bound})")]
    NotLeftInvertible { lower_bound: f64 },

    #[error("coefficient sequence is not the image of a vector in the support bound (residual {residual:e})")]
    Inconsistent { residual: f64 },

    #[error("point {point} lies outside the disc of radius {radius}")]
    OutsideDisc { point: f64, radius: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operator does not commute with the shift (commutator norm {norm:e})")]
    NotInCommutant { norm: f64 },

    #[error("rotation parameter has modulus {modulus}, expected 1")]
    NotUnimodular { modulus: f64 },

    #[error("{points} quadrature points cannot integrate trigonometric degree {degree} exactly")]
    QuadratureTooCoarse { points: usize, degree: usize },

    #[error("shift is not balanced: ||S e_{u}|| != ||S e_{v}||")]
    NotBalanced { u: String, v: String },

    #[error("vector is not supported in generation {expected}")]
    WrongGeneration { expected: usize },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("symbol of dimension {dim} is not scalar and too large to store densely")]
    SymbolTooLarge { dim: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
