use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input data: {0}")]
    InvalidData(String),

    #[error("integration did not converge: max relative change {achieved:.3e} > {requested:.3e} after {refinements} refinements")]
    NotConverged {
        requested: f64,
        achieved: f64,
        refinements: usize,
    },

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn bad_data(msg: impl Into<String>) -> Error {
    Error::InvalidData(msg.into())
}
