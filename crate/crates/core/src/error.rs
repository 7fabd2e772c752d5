use thiserror::Error;

/// Errors produced by napkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("layer {layer}: {message}")]
    Model { layer: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid class id {class} for a network with {outputs} outputs")]
    InvalidClass { class: usize, outputs: usize },

    #[error("invalid neuron (layer {layer}, index {index})")]
    InvalidNeuron { layer: usize, index: usize },

    #[error("signature mismatch: {left:?} vs {right:?}")]
    SignatureMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("no data: {0}")]
    EmptyData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear program failed: {0}")]
    Lp(#[from] crate::lp::LpError),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
