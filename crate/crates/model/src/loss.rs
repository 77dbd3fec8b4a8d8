//! Combined training objective: token cross-entropy averaged over two
//! dropout-perturbed passes, a symmetric KL consistency term between the two
//! output distributions, and a guidance term pulling the final-layer
//! cross-attention toward the token alignment map.

use retro3d_tensor::Tensor;

use crate::config::ModelConfig;
use crate::decoder::decode;
use crate::encoder::encode;
use crate::input::ModelInput;
use crate::params::ParamStore;
use crate::seeds::Phase;
use crate::{ModelError, Result, PAD_ID};

pub struct LossParts {
    pub total: Tensor,
    pub ce: f64,
    pub kl: f64,
    pub sa: f64,
    /// False when the example carries no usable alignment rows.
    pub sa_active: bool,
}

const SA_LOG_EPS: f64 = 1e-12;

/// Loss for one example. `run_seed`/`step` drive the two dropout streams.
pub fn loss(
    input: &ModelInput,
    params: &ParamStore,
    config: &ModelConfig,
    run_seed: u64,
    step: u64,
) -> Result<LossParts> {
    if input.reactant_ids.len() < 2 {
        return Err(ModelError::Input("example has no reactant tokens".into()));
    }
    let prefix = &input.reactant_ids[..input.reactant_ids.len() - 1];
    let targets = &input.reactant_ids[1..];

    // Alignment target rows, shared by both passes.
    let sam_target = alignment_target(input, prefix.len())?;

    let mut ce_terms = Vec::new();
    let mut sa_terms = Vec::new();
    let mut logits_pair = Vec::new();
    for pass in 0..2u64 {
        let phase = Phase::train(run_seed, step, pass);
        let enc = encode(input, params, config, &phase)?;
        let dec = decode(prefix, &enc.memory, params, config, &phase)?;
        ce_terms.push(dec.logits.cross_entropy(targets, PAD_ID)?);
        if let Some((target, rows)) = &sam_target {
            sa_terms.push(alignment_ce(&dec.cross_attention, target, *rows)?);
        }
        logits_pair.push(dec.logits);
    }

    let ce = ce_terms[0].add(&ce_terms[1])?.scale(0.5)?;
    let kl = logits_pair[0].kl_divergence(&logits_pair[1])?;

    let (sa, sa_active) = if sa_terms.is_empty() {
        (Tensor::scalar(0.0)?, false)
    } else {
        (sa_terms[0].add(&sa_terms[1])?.scale(0.5)?, true)
    };

    let total = ce
        .add(&kl.scale(config.alpha)?)?
        .add(&sa.scale(config.beta)?)?;
    Ok(LossParts {
        ce: ce.item()?,
        kl: kl.item()?,
        sa: sa.item()?,
        sa_active,
        total,
    })
}

/// Build the [L, M] guidance distribution from the raw alignment map.
///
/// Decoder row t predicts reactant token t, so it takes alignment row t;
/// product token j sits at memory column j + 1 (BOS offset). Rows without
/// alignment entries are all-zero and excluded from the average.
fn alignment_target(input: &ModelInput, rows: usize) -> Result<Option<(Tensor, usize)>> {
    let Some(sam) = &input.sam else {
        return Ok(None);
    };
    if sam.is_empty_map() {
        return Ok(None);
    }
    let m = input.product_ids.len();
    if sam.cols + 2 != m {
        return Err(ModelError::Input(format!(
            "alignment map has {} product columns but the framed product has {} positions",
            sam.cols, m
        )));
    }
    let mut data = vec![0.0; rows * m];
    let mut included = 0;
    for t in 0..rows.min(sam.rows) {
        if !sam.row_has_any(t) {
            continue;
        }
        let count = (0..sam.cols).filter(|&j| sam.get(t, j)).count();
        for j in 0..sam.cols {
            if sam.get(t, j) {
                data[t * m + (j + 1)] = 1.0 / count as f64;
            }
        }
        included += 1;
    }
    if included == 0 {
        return Ok(None);
    }
    Ok(Some((Tensor::from_vec(vec![rows, m], data)?, included)))
}

/// Row-wise cross-entropy between the head-averaged cross-attention and the
/// guidance rows.
fn alignment_ce(cross_heads: &[Tensor], target: &Tensor, included_rows: usize) -> Result<Tensor> {
    let mut avg = cross_heads[0].clone();
    for head in &cross_heads[1..] {
        avg = avg.add(head)?;
    }
    let avg = avg.scale(1.0 / cross_heads.len() as f64)?;
    let log_probs = avg.add_scalar(SA_LOG_EPS)?.ln()?;
    let weighted = log_probs.mul(target)?;
    Ok(weighted.sum()?.scale(-1.0 / included_rows as f64)?)
}
