use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} must be a power of two >= 8")]
    BadGridSize(usize),
    #[error("grid length must be positive and finite, got {0}")]
    BadGridLength(f64),
    #[error("grids do not match: {0}")]
    GridMismatch(&'static str),
    #[error("director norm {norm:.3e} below floor {floor:.3e} at sample ({i}, {j})")]
    DegenerateDirector {
        i: usize,
        j: usize,
        norm: f64,
        floor: f64,
    },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in {what} at sample ({i}, {j})")]
    NonFinite {
        what: &'static str,
        i: usize,
        j: usize,
    },
    #[error("time step collapsed at t = {t:.6e}: required dt {required:.3e} < floor {floor:.3e}")]
    StepCollapse { t: f64, required: f64, floor: f64 },
    #[error("no feasible candidate: {0}")]
    Infeasible(String),
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("validation error: {0}")]
    ValidationError(String),
    #[error("bad magic bytes: not a field snapshot")]
    BadMagic,
    #[error("snapshot format version {0} unsupported (expected 1)")]
    VersionMismatch(u32),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
