use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("monomial {monomial:?} is not covered by any clique basis")]
    Coverage { monomial: Vec<u32> },

    #[error("eigendecomposition failed on block {block}")]
    Eigen { block: usize },

    #[error("projection did not converge: {0}")]
    NonConvergence(String),

    #[error("parse error at line {line}, token {offset}: {message}")]
    Parse {
        line: usize,
        offset: usize,
        message: String,
    },

    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),

    #[error("infeasible cover: {0}")]
    InfeasibleCover(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Eigen { .. } | Error::NonConvergence(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
