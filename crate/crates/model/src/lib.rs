//! Retrosynthesis transformer: token + 3D fusion embeddings, an encoder with
//! distance-weighted self-attention refined layer by layer, a decoder whose
//! final-layer cross-attention is guided by the token alignment map, and
//! beam-search decoding with canonical-match metrics.

pub mod attention;
pub mod beam;
pub mod checkpoint;
pub mod config;
pub mod decoder;
pub mod embedding;
pub mod encoder;
pub mod input;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod params;
pub mod seeds;

pub use beam::{beam_search, greedy_decode, DecodeResult};
pub use config::ModelConfig;
pub use input::{ModelInput, Spatial3D};
pub use loss::{loss, LossParts};
pub use metrics::{topk_metrics, TopkReport};
pub use params::ParamStore;

use thiserror::Error;

/// Reserved vocabulary ids.
pub const PAD_ID: usize = 0;
pub const BOS_ID: usize = 1;
pub const EOS_ID: usize = 2;
pub const UNK_ID: usize = 3;
pub const SPECIAL_TOKENS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] retro3d_tensor::TensorError),
    #[error(transparent)]
    Chem(#[from] retro3d_chem::ChemError),
    #[error("config error: {0}")]
    Config(String),
    #[error("parameter error: {0}")]
    Param(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
