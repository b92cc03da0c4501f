use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("non-finite value in `{0}`")]
    Numeric(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("graph validation failed: neurons {0:?} cannot reach an output")]
    Unreachable(Vec<usize>),

    #[error("infeasible mapping: neuron {neuron} has fan-in {fan_in} > synapse capacity {capacity}")]
    Infeasible {
        neuron: usize,
        fan_in: usize,
        capacity: usize,
    },

    #[error("allocation error: {0}")]
    Allocation(String),

    #[error("technique `{technique}` is not supported on {core} cores")]
    UnsupportedTechnique { technique: String, core: String },

    #[error("config error at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
