use thiserror::Error;

/// Errors produced by measure construction, distance evaluation, model
/// checking, and the integrators.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("empty point list: an empirical measure needs at least one anchor")]
    EmptyMeasure,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operation requires 1-d measures, got dimension {0}")]
    NotOneDimensional(usize),

    #[error("point counts differ: {left} vs {right}")]
    PointCountMismatch { left: usize, right: usize },

    #[error(
        "exact assignment limited to {max_n} points per side (got {n}); \
         use the sliced estimator for larger inputs"
    )]
    TooManyPoints { n: usize, max_n: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("model `{0}` has no dissipativity constants")]
    MissingConstants(String),

    #[error("unknown builtin model `{0}`")]
    UnknownModel(String),

    #[error("no admissible stationary moment root: {0}")]
    NoStationaryRoot(String),

    #[error(
        "integrator diverged (non-finite state) at particle {particle}, \
         block {block}, inner step {inner_step}; last finite |z| = {magnitude}"
    )]
    Divergence {
        particle: usize,
        block: usize,
        inner_step: usize,
        magnitude: f64,
    },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
