use crate::dynamics::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("computation failed: {0}")]
    Computation(String),

    /// The adaptive step size fell below the underflow threshold. Carries the
    /// trajectory recorded up to that point when one was being recorded.
    #[error("step size underflow at t = {t} (h = {step:e})")]
    Stiffness {
        t: f64,
        step: f64,
        partial: Option<Box<Trajectory>>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
