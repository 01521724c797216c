use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "symmetric eigensolver did not converge on eigenvalue {index} after {iterations} \
         iterations (n = {n}, frobenius norm = {norm:.6e}, residual off-diagonal = {residual:.3e})"
    )]
    EigenNoConvergence {
        n: usize,
        index: usize,
        iterations: usize,
        norm: f64,
        residual: f64,
    },

    #[error("gaussian mixture with k = {k} could not be fitted: {reason}")]
    GmmFailed { k: usize, reason: String },

    #[error("no model in the candidate range could be fitted")]
    NoModelFitted,

    #[error("penalised logistic regression did not converge at lambda = {lambda:.6e}")]
    LassoNoConvergence { lambda: f64 },

    #[error("degenerate response: {0}")]
    DegenerateResponse(String),

    #[error("bootstrap {index} failed: {source}")]
    Bootstrap { index: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
