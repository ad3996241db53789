use thiserror::Error;

use crate::factor::VarId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("variable {var} has cardinality {left} in one factor and {right} in another")]
    CardinalityMismatch {
        var: VarId,
        left: usize,
        right: usize,
    },

    #[error("variable {0} is not in the factor scope")]
    NotInScope(VarId),

    #[error("variable {var} is out of range for a model with {n} variables")]
    UnknownVariable { var: VarId, n: usize },

    #[error("invalid factor: {0}")]
    InvalidFactor(String),

    #[error("invalid elimination order: {0}")]
    InvalidOrder(String),

    #[error("model too wide: a bucket spans {width} variables, cap is {cap}")]
    ModelTooWide { width: usize, cap: usize },

    #[error("factor over {scope} variables does not fit in a mini-bucket of ibound {ibound}")]
    FactorExceedsIbound { scope: usize, ibound: usize },

    #[error("matrix contains non-finite or negative entries")]
    NonFiniteMatrix,

    #[error("state space of {bits:.1} bits exceeds the enumeration limit of {limit} bits")]
    StateSpaceTooLarge { bits: f64, limit: u32 },

    #[error("parse error at token {token}: {message}")]
    Parse { token: usize, message: String },

    #[error("BAYES networks are not supported, only MARKOV")]
    BayesUnsupported,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
