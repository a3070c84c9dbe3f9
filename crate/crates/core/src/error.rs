use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A distribution, channel or experiment was configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),

    /// A piecewise-constant input does not cover the requested interval.
    #[error("malformed input signal: {0}")]
    MalformedSignal(String),

    /// A closed-form value left the representable range.
    #[error("saturation: {0}")]
    Saturation(String),

    /// A full-coding run would exceed the configured codebook limits.
    #[error("resource limit exceeded: {0}; use abstract-error mode for larger experiments")]
    Resource(String),

    /// No codebook row is consistent with the observed inter-reception times.
    #[error("decode failure: no feasible codeword")]
    DecodeFailure,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
