//! The part-graph classifier: a shared per-point encoder pooled per part,
//! multi-head graph-attention layers over the part graph, and an
//! object-level classifier fed by max-pooled node features (`MaxPool`) or
//! averaged per-node predictions (`SingleNode`).

mod config;
mod gat;
mod mask;
mod model;
mod params;

use thiserror::Error;

pub use config::{ModelConfig, Pooling};
pub use gat::{gat_layer_backward, gat_layer_forward, GatCache, HeadCache, HeadGrads};
pub use mask::AdjacencyMask;
pub use model::{backward, encode_part, forward, predict, update_running_stats, GraphInput, GraphOutput, ModelForward};
pub use params::{AttentionHead, Dense, EncoderLayer, GatLayer, ModelParams, ParamKind, ReduceLayer};

use crate::nn::NnError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("graph {0} has no parts")]
    EmptyGraph(usize),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("{0} labels for {1} graphs")]
    LabelCount(usize, usize),
}
