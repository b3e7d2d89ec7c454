use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Light-shift evaluation with the pump exactly on an atomic transition.
    #[error("light shift is singular: pump detuning from the {transition} transition is zero")]
    Singularity { transition: &'static str },

    /// The truncated Fock basis is too small for the requested state.
    #[error(
        "truncation error: {message} (try dims of at least {suggested_dim1}x{suggested_dim2})"
    )]
    Truncation {
        message: String,
        suggested_dim1: usize,
        suggested_dim2: usize,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
