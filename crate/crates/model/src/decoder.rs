//! Decoder stack: causal self-attention over the prefix, cross-attention to
//! the encoder memory, and vocabulary logits. The final layer's
//! cross-attention is surfaced for alignment guidance and inspection.

use retro3d_tensor::{Tensor, NEG_MASK};

use crate::attention::multi_head_attention;
use crate::config::ModelConfig;
use crate::embedding::{linear, sinusoidal_pe};
use crate::params::ParamStore;
use crate::seeds::Phase;
use crate::{ModelError, Result};

pub struct DecodeOutput {
    /// [L, V] next-token logits per prefix position.
    pub logits: Tensor,
    /// Final decoder layer's cross-attention, per head, [L, M].
    pub cross_attention: Vec<Tensor>,
    /// All layers' cross-attention (for dumps).
    pub cross_attention_all: Vec<Vec<Tensor>>,
}

const LN_EPS: f64 = 1e-5;

/// Teacher-forced or incremental decode over a BOS-led prefix.
pub fn decode(
    prefix_ids: &[usize],
    memory: &Tensor,
    params: &ParamStore,
    config: &ModelConfig,
    phase: &Phase,
) -> Result<DecodeOutput> {
    let l = prefix_ids.len();
    if l == 0 {
        return Err(ModelError::Input("empty decoder prefix".into()));
    }
    if prefix_ids[0] != crate::BOS_ID {
        return Err(ModelError::Input("decoder prefix must start with BOS".into()));
    }
    if l > config.max_len {
        return Err(ModelError::Input(format!(
            "prefix length {} exceeds max_len {}",
            l, config.max_len
        )));
    }

    let emb = params
        .get("embed.token")?
        .embedding_lookup(prefix_ids)?
        .scale((config.dim as f64).sqrt())?;
    let pe = sinusoidal_pe(l, config.dim)?;
    let mut x = phase.dropout(emb.add(&pe)?, config.dropout_emb)?;

    // Causal mask: position t may not see positions > t.
    let mut mask = vec![0.0; l * l];
    for t in 0..l {
        for u in t + 1..l {
            mask[t * l + u] = NEG_MASK;
        }
    }
    let causal = Tensor::from_vec(vec![l, l], mask)?;

    let mut cross_all = Vec::with_capacity(config.layers_dec);
    for layer in 0..config.layers_dec {
        let self_attn = multi_head_attention(
            params,
            &format!("dec.{layer}.self"),
            &x,
            &x,
            config,
            None,
            Some(&causal),
            phase,
        )?;
        let res = x.add(&phase.dropout(self_attn.hidden, config.dropout_ffn)?)?;
        x = res.layernorm(
            &params.get(&format!("dec.{layer}.ln1.gamma"))?,
            &params.get(&format!("dec.{layer}.ln1.beta"))?,
            LN_EPS,
        )?;

        let cross = multi_head_attention(
            params,
            &format!("dec.{layer}.cross"),
            &x,
            memory,
            config,
            None,
            None,
            phase,
        )?;
        cross_all.push(cross.probs);
        let res = x.add(&phase.dropout(cross.hidden, config.dropout_ffn)?)?;
        x = res.layernorm(
            &params.get(&format!("dec.{layer}.ln2.gamma"))?,
            &params.get(&format!("dec.{layer}.ln2.beta"))?,
            LN_EPS,
        )?;

        let f = linear(&x, params, &format!("dec.{layer}.ffn.w1"), &format!("dec.{layer}.ffn.b1"))?
            .relu()?;
        let f = phase.dropout(f, config.dropout_ffn)?;
        let f = linear(&f, params, &format!("dec.{layer}.ffn.w2"), &format!("dec.{layer}.ffn.b2"))?;
        let res = x.add(&phase.dropout(f, config.dropout_ffn)?)?;
        x = res.layernorm(
            &params.get(&format!("dec.{layer}.ln3.gamma"))?,
            &params.get(&format!("dec.{layer}.ln3.beta"))?,
            LN_EPS,
        )?;
    }

    let logits = linear(&x, params, "out.w", "out.b")?;
    let cross_attention = cross_all.last().cloned().unwrap_or_default();
    Ok(DecodeOutput { logits, cross_attention, cross_attention_all: cross_all })
}

/// Logits for the next token after `prefix`, plus the final-layer
/// cross-attention (evaluation path).
pub fn decode_step(
    prefix_ids: &[usize],
    memory: &Tensor,
    params: &ParamStore,
    config: &ModelConfig,
) -> Result<(Vec<f64>, Vec<Tensor>)> {
    let out = decode(prefix_ids, memory, params, config, &Phase::Eval)?;
    let last = out.logits.embedding_lookup(&[prefix_ids.len() - 1])?;
    Ok((last.data().to_vec(), out.cross_attention))
}
