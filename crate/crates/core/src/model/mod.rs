//! The sequential (CNN) and graph (CNN + GCN + top-K) classifiers.
//!
//! Everything is computed in `f64` with hand-written backward passes, so the
//! gradients can be checked against finite differences exactly.

pub mod checkpoint;
pub mod config;
pub mod layers;
pub mod network;
pub mod params;

use thiserror::Error;

pub use config::{ConfigError, ModelConfig, ModelKind};
pub use network::{BatchGradient, BnMode, GradOptions, Model, Prediction};
pub use params::ModelParams;

use crate::representation::InvalidShape;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("token id {id} is outside the vocabulary of {vocab} entries")]
    IdOutOfRange { id: u32, vocab: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Representation(#[from] InvalidShape),
    #[error("input does not fit the model: {0}")]
    Shape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}
