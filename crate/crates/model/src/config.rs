//! Model hyperparameters.

use serde::{Deserialize, Serialize};

use crate::{ModelError, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ModelConfig {
    pub layers_enc: usize,
    pub layers_dec: usize,
    pub heads: usize,
    /// How many of the heads multiply their logits by the distance weight.
    pub spatial_heads: usize,
    pub dim: usize,
    pub ffn_dim: usize,
    /// Gaussian kernel channel count K.
    pub kernels: usize,
    pub dropout_ffn: f64,
    pub dropout_attn: f64,
    pub dropout_emb: f64,
    pub vocab_size: usize,
    pub max_len: usize,
    /// KL (consistency) loss weight.
    pub alpha: f64,
    /// Alignment-guidance loss weight.
    pub beta: f64,
    /// Message-passing rounds of the 3D encoder.
    pub comenet_layers: usize,
    /// Sinusoidal frequencies per geometric feature.
    pub geo_frequencies: usize,
    /// Keep the leading minus of the Gaussian basis (formula-verbatim).
    pub negate_gaussian: bool,
    /// Optional hard receptive-field cutoff for spatial heads, in angstroms.
    pub spatial_cutoff_angstrom: Option<f64>,
    /// Alignment loss formulation. `row_ce` is the only implemented mode:
    /// row-normalized alignment rows against head-averaged cross-attention.
    pub sam_loss_mode: String,
}

impl Default for ModelConfig {
    /// Full-scale defaults.
    fn default() -> Self {
        ModelConfig {
            layers_enc: 6,
            layers_dec: 6,
            heads: 8,
            spatial_heads: 4,
            dim: 512,
            ffn_dim: 2048,
            kernels: 512,
            dropout_ffn: 0.1,
            dropout_attn: 0.1,
            dropout_emb: 0.1,
            vocab_size: 84,
            max_len: 256,
            alpha: 0.5,
            beta: 1.0,
            comenet_layers: 3,
            geo_frequencies: 16,
            negate_gaussian: true,
            spatial_cutoff_angstrom: None,
            sam_loss_mode: "row_ce".to_string(),
        }
    }
}

impl ModelConfig {
    /// Desk-scale configuration: runs in minutes on a CPU.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            layers_enc: 2,
            layers_dec: 2,
            heads: 4,
            spatial_heads: 2,
            dim: 64,
            ffn_dim: 128,
            kernels: 16,
            vocab_size,
            max_len: 160,
            geo_frequencies: 8,
            comenet_layers: 2,
            ..ModelConfig::default()
        }
    }

    /// Micro configuration for gradient checks.
    pub fn micro(vocab_size: usize) -> Self {
        ModelConfig {
            layers_enc: 1,
            layers_dec: 1,
            heads: 2,
            spatial_heads: 1,
            dim: 16,
            ffn_dim: 32,
            kernels: 4,
            vocab_size,
            max_len: 64,
            geo_frequencies: 4,
            comenet_layers: 1,
            ..ModelConfig::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim % self.heads != 0 {
            return Err(ModelError::Config(format!(
                "dim {} must be a positive multiple of heads {}",
                self.dim, self.heads
            )));
        }
        if self.dim % 2 != 0 {
            return Err(ModelError::Config("dim must be even for sinusoidal embeddings".into()));
        }
        if self.spatial_heads == 0 || self.spatial_heads >= self.heads {
            return Err(ModelError::Config(format!(
                "spatial_heads {} must satisfy 1 <= s < heads {}",
                self.spatial_heads, self.heads
            )));
        }
        if self.kernels < self.spatial_heads {
            return Err(ModelError::Config(format!(
                "kernels {} must be >= spatial_heads {}",
                self.kernels, self.spatial_heads
            )));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(ModelError::Config("alpha and beta must be nonnegative".into()));
        }
        if self.vocab_size <= crate::UNK_ID {
            return Err(ModelError::Config("vocab must cover the reserved specials".into()));
        }
        if self.sam_loss_mode != "row_ce" {
            return Err(ModelError::Config(format!(
                "unknown sam_loss_mode {:?}",
                self.sam_loss_mode
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_carry_loss_weights() {
        let c = ModelConfig::default();
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.beta, 1.0);
        assert_eq!(c.heads, 8);
        assert_eq!(c.spatial_heads, 4);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        let mut c = ModelConfig::desk(50);
        c.dim = 65;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk(50);
        c.spatial_heads = c.heads;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::desk(50);
        c.alpha = -1.0;
        assert!(c.validate().is_err());
    }
}
