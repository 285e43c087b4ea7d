use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An entry of the Γ weight matrix vanished, i.e. two eigenphases of the
    /// logarithm are separated by 2π and `dexp` is not invertible there.
    #[error("degenerate logarithm branch: |Γ| = {0:e}")]
    DegenerateBranch(f64),

    #[error("degenerate linear model: Jacobian vanishes but the residual does not")]
    DegenerateModel,

    #[error("ill-conditioning is infinite at every sampled norm")]
    NoFiniteConditioning,

    #[error("propagation produced non-finite values at step {0}")]
    NonFinitePropagation(usize),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
