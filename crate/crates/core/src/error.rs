use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the engine. Numeric payloads are reported in `f64`
/// whatever scalar type the failing computation used.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },

    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate Lagrangian: mass matrix condition number {cond:e} is not below {limit:e}")]
    DegenerateLagrangian { cond: f64, limit: f64 },

    #[error("singular linear system in {0}")]
    Singular(String),

    #[error("frame is singular: condition number {cond:e}")]
    FrameSingular { cond: f64 },

    #[error("invariance check failed: {0}")]
    InvarianceFailure(String),

    #[error("group-velocity elimination failed: {0}")]
    ConstraintSolveFailure(String),

    #[error("factorization outside the big cell: leading minor {index} is {value:e}")]
    FactorizationOutsideBigCell { index: usize, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("chart: {0}")]
    Chart(String),

    #[error("outside section domain: {0}")]
    SectionDomain(String),
}

impl Error {
    pub(crate) fn non_finite(what: impl Into<String>) -> Self {
        Error::NonFinite(what.into())
    }
}
