use thiserror::Error;

use crate::report::SampleRecord;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the domain [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{what} = {value} is outside the range [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("sampling failure: {0}")]
    Sampling(String),

    #[error("division by zero: Γ({location}) = 0 inside the integration range")]
    Division { location: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("evaluation failed at sample {sample:?}: {source}")]
    Evaluation {
        sample: Box<SampleRecord>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<S: Into<String>>(msg: S) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn precondition<S: Into<String>>(msg: S) -> Error {
    Error::Precondition(msg.into())
}
