use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid mismatch: {left} vs {right} interior nodes")]
    GridMismatch { left: usize, right: usize },

    #[error("vector length {len} does not match grid with {n_interior} interior nodes")]
    LengthMismatch { len: usize, n_interior: usize },

    #[error("mode mismatch: expected {expected}, got {got}")]
    ModeMismatch { expected: &'static str, got: &'static str },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("zero pivot in tridiagonal elimination at node {node}")]
    SingularPivot { node: usize },

    #[error("restart point is not inside trust region {region}")]
    RestartOutsideRegion { region: usize },

    #[error("initial state is not inside the starting trust region")]
    StartOutsideRegion,

    #[error("truncation storm: {sigma} truncations after {iterations} iterations")]
    TruncationStorm { sigma: usize, iterations: usize },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
