//! Encoder stack: fusion embedding in, memory + final distance weight out.

use retro3d_tensor::Tensor;

use crate::attention::{
    distance_weight, multi_head_attention, pair_context, weight_refine, Activation, PairContext,
    SpatialAttn,
};
use crate::config::ModelConfig;
use crate::embedding::{comenet_lite, fuse, linear, pad_to_tokens, sinusoidal_pe};
use crate::input::ModelInput;
use crate::params::ParamStore;
use crate::seeds::Phase;
use crate::{ModelError, Result};

pub struct EncodeOutput {
    /// [M, D] contextual token states.
    pub memory: Tensor,
    /// Distance weight after the last refinement, [M*M, K]. Constant zeros
    /// when the input has no 3D conditioning.
    pub phi_final: Tensor,
    /// Per-layer, per-head self-attention distributions.
    pub self_attention: Vec<Vec<Tensor>>,
}

const LN_EPS: f64 = 1e-5;

pub fn encode(
    input: &ModelInput,
    params: &ParamStore,
    config: &ModelConfig,
    phase: &Phase,
) -> Result<EncodeOutput> {
    let m = input.product_ids.len();
    if m == 0 {
        return Err(ModelError::Input("empty product sequence".into()));
    }
    if m > config.max_len {
        return Err(ModelError::Input(format!(
            "product length {} exceeds max_len {}",
            m, config.max_len
        )));
    }
    if input.binding.len() != m {
        return Err(ModelError::Input("binding length mismatch".into()));
    }

    let token_emb = params
        .get("embed.token")?
        .embedding_lookup(&input.product_ids)?
        .scale((config.dim as f64).sqrt())?;

    // 3D stream; zero mode degrades to a plain transformer.
    let (padded_p3d, ctx): (Tensor, Option<PairContext>) = match &input.spatial {
        Some(sp) => {
            if sp.distance.size != m {
                return Err(ModelError::Input(format!(
                    "distance matrix size {} does not match framed length {}",
                    sp.distance.size, m
                )));
            }
            let p3d = comenet_lite(&sp.graph, &sp.geo, params, config)?;
            let padded = pad_to_tokens(&p3d, &input.binding)?;
            let ctx = pair_context(&sp.distance, &input.binding, &sp.graph, config)?;
            (padded, Some(ctx))
        }
        None => (Tensor::zeros(vec![m, config.dim]), None),
    };

    let lambda1 = params.get("fuse.lambda1")?;
    let lambda2 = params.get("fuse.lambda2")?;
    let fused = fuse(&padded_p3d, &token_emb, &lambda1, &lambda2)?;
    let pe = sinusoidal_pe(m, config.dim)?;
    let mut x = phase.dropout(fused.add(&pe)?, config.dropout_emb)?;

    let mut phi = match &ctx {
        Some(ctx) => distance_weight(ctx, params, config, Activation::Gelu)?,
        None => Tensor::zeros(vec![m * m, config.kernels]),
    };

    let mut self_attention = Vec::with_capacity(config.layers_enc);
    for l in 0..config.layers_enc {
        let spatial = SpatialAttn {
            phi: &phi,
            cutoff_mask: ctx.as_ref().and_then(|c| c.cutoff_mask.as_ref()),
        };
        let attn = multi_head_attention(
            params,
            &format!("enc.{l}.attn"),
            &x,
            &x,
            config,
            Some(&spatial),
            None,
            phase,
        )?;
        self_attention.push(attn.probs);
        let res = x.add(&phase.dropout(attn.hidden, config.dropout_ffn)?)?;
        x = res.layernorm(
            &params.get(&format!("enc.{l}.ln1.gamma"))?,
            &params.get(&format!("enc.{l}.ln1.beta"))?,
            LN_EPS,
        )?;

        let f = linear(&x, params, &format!("enc.{l}.ffn.w1"), &format!("enc.{l}.ffn.b1"))?.relu()?;
        let f = phase.dropout(f, config.dropout_ffn)?;
        let f = linear(&f, params, &format!("enc.{l}.ffn.w2"), &format!("enc.{l}.ffn.b2"))?;
        let res = x.add(&phase.dropout(f, config.dropout_ffn)?)?;
        x = res.layernorm(
            &params.get(&format!("enc.{l}.ln2.gamma"))?,
            &params.get(&format!("enc.{l}.ln2.beta"))?,
            LN_EPS,
        )?;

        // Refine the distance weight for the next layer; meaningless (and
        // skipped) without 3D conditioning.
        if l + 1 < config.layers_enc && ctx.is_some() {
            phi = weight_refine(&phi, &x, params, l)?;
        }
    }

    Ok(EncodeOutput { memory: x, phi_final: phi, self_attention })
}
