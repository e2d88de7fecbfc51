use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("json error in {path}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("recourse infeasible for scenario {scenario} (row {row})")]
    RecourseInfeasible { scenario: usize, row: String },
    #[error("sampler exhausted after {drawn} samples (minimum {required})")]
    SamplerExhausted { drawn: usize, required: usize },
    #[error("simulation aborted at epoch {epoch}: {reason}")]
    Simulation { epoch: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<S: Into<String>>(msg: S) -> Error {
    Error::InvalidInput(msg.into())
}
