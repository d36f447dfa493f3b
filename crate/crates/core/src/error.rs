use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The h-parameterised equation is not uniformly parabolic at some time.
    #[error("regime violation at t = {time}: effective diffusion {value:.6e} below bound {bound:.6e}")]
    Regime { time: f64, value: f64, bound: f64 },

    /// A linear solve or quadrature failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A numerical failure inside the propagator, annotated with the index and time.
    #[error("propagator failure at alpha = [{alpha}], t = {time}: {source}")]
    Propagator {
        alpha: String,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
