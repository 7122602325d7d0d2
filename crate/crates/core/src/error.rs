use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected n = {expected}, found n = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid {name}: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    #[error("empty value set")]
    EmptySet,

    #[error("gauge subdifferential is only available for n = 1 (got n = {0})")]
    GaugeDimension(usize),

    #[error("point is not in the horizontal plane of the base (t-residual {residual:e})")]
    NotHorizontal { residual: f64 },

    #[error("invalid closed H-chain: {0}")]
    InvalidChain(String),

    #[error("chain closure is degenerate: the last vertex cannot move the symplectic sum")]
    DegenerateChain,

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("operator is set-valued at an iterate ({0})")]
    SetValuedIterate(String),

    #[error("angle {index} = {value} outside its range")]
    AngleOutOfRange { index: usize, value: f64 },

    #[error("lemma hypothesis violated: {0}")]
    LemmaHypothesis(String),

    #[error("internal contradiction: {0}")]
    Internal(String),

    #[error("linear program failed: {0}")]
    Lp(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
