use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("ordinal overflow")]
    OrdinalOverflow,
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("malformed term at node {node}: {reason}")]
    MalformedTerm { node: usize, reason: String },
    #[error("position {0} is out of the domain")]
    PositionOutOfDomain(String),
    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("non-convergent: {0}")]
    NonConvergent(String),
    #[error("not composable at {path}: target {left} differs from source {right}")]
    NotComposable { path: String, left: String, right: String },
    #[error("malformed step: {0}")]
    MalformedStep(String),
    #[error("invalid derivation at {path}: {reason}")]
    DerivationInvalid { path: String, reason: String },
    #[error("parse error at {line}:{col}: expected {expected}")]
    Parse { line: usize, col: usize, expected: String },
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::DerivationInvalid { path: path.into(), reason: reason.into() }
    }

    pub fn pre(msg: impl Into<String>) -> Self {
        Error::PreconditionViolated(msg.into())
    }
}
