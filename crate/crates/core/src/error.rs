use thiserror::Error;

/// Byte range `[start, end)` into the source text of an expression.
pub type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: expected {}", expected.join(" or "))]
    Syntax { offset: usize, expected: Vec<String> },

    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },

    #[error("unbound name `{0}`")]
    UnboundName(String),

    #[error("domain error: {message} (bytes {}..{})", span.0, span.1)]
    Domain { message: String, span: Span },

    #[error("singular system: effective rank {rank}, need {needed}")]
    SingularSystem { rank: usize, needed: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point outside the domain of chart `{chart}` (coordinate {coordinate})")]
    OutOfDomain { chart: String, coordinate: usize },

    #[error("covector does not annihilate the Reeb field (|eta(Z)| = {residual:e})")]
    NotInZ0 { residual: f64 },

    #[error("precondition failed: {what} at {point:?} (residual {residual:e})")]
    PreconditionFailed {
        what: String,
        point: Vec<f64>,
        residual: f64,
    },

    #[error("point is not covered by any chart of the atlas")]
    OutOfAtlas,

    #[error("unknown chart `{0}`")]
    UnknownChart(String),

    #[error("section vanishes at the point (|s| = {value:e})")]
    ZeroDivisor { value: f64 },

    #[error("all momentum components vanish at the point")]
    ZeroLocus,

    #[error("step size underflow at t = {time}")]
    StepSizeUnderflow { time: f64 },

    #[error("trajectory left the atlas at t = {time}")]
    LeftAtlas { time: f64 },

    #[error("insufficient samples: got {got}, need at least {needed}")]
    InsufficientSamples { got: usize, needed: usize },

    #[error("cycle is not closed (gap {gap:e})")]
    NotClosed { gap: f64 },

    #[error("function is not positive at {point:?} (value {value})")]
    PositivityViolation { point: Vec<f64>, value: f64 },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("validation failed: {check} at {location} (residual {residual:e})")]
    Validation {
        check: String,
        location: String,
        residual: f64,
    },

    #[error("evaluation failed at t = {time}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
