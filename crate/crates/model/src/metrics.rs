//! Top-k accuracy and validity over decoded candidates.

use retro3d_chem::{canonical_key, parse_smiles, validity_check};

use crate::beam::DecodeResult;
use crate::{Result, BOS_ID, EOS_ID, PAD_ID, UNK_ID};

#[derive(Debug, Clone)]
pub struct CandidateEval {
    pub rank: usize,
    pub smiles: String,
    pub score: f64,
    pub valid: bool,
    pub hit: bool,
}

#[derive(Debug, Clone)]
pub struct TopkReport {
    pub ks: Vec<usize>,
    /// hit[i]: any of the top ks[i] candidates matches the ground truth.
    pub hits: Vec<bool>,
    /// validity[i]: fraction of the top ks[i] candidates that parse.
    pub validity: Vec<f64>,
    pub candidates: Vec<CandidateEval>,
}

/// Turn an id sequence back into a SMILES string using the vocabulary's
/// id -> text table. Specials terminate (EOS) or poison (PAD/UNK) the
/// string; a poisoned candidate never parses and so counts as invalid.
pub fn detokenize(ids: &[usize], id_to_text: &dyn Fn(usize) -> Option<String>) -> Option<String> {
    let mut out = String::new();
    for &id in ids {
        match id {
            BOS_ID => continue,
            EOS_ID => break,
            PAD_ID | UNK_ID => return None,
            other => out.push_str(&id_to_text(other)?),
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// Evaluate decoded candidates against the ground-truth reactants.
/// A hit at k means some top-k candidate's canonical key equals the ground
/// truth's; validity at k is the parseable fraction of the top k.
pub fn topk_metrics(
    decoded: &DecodeResult,
    candidate_smiles: &[Option<String>],
    ground_truth: &str,
    ks: &[usize],
) -> Result<TopkReport> {
    let truth_key = canonical_key(&parse_smiles(ground_truth)?);
    let mut candidates = Vec::new();
    for (rank, ((_, score), smiles)) in decoded.candidates.iter().zip(candidate_smiles).enumerate()
    {
        let (valid, hit, text) = match smiles {
            Some(s) => {
                let valid = validity_check(s);
                let hit = valid
                    && parse_smiles(s).map(|g| canonical_key(&g) == truth_key).unwrap_or(false);
                (valid, hit, s.clone())
            }
            None => (false, false, String::new()),
        };
        candidates.push(CandidateEval { rank: rank + 1, smiles: text, score: *score, valid, hit });
    }

    let mut hits = Vec::with_capacity(ks.len());
    let mut validity = Vec::with_capacity(ks.len());
    for &k in ks {
        let top = &candidates[..k.min(candidates.len())];
        hits.push(top.iter().any(|c| c.hit));
        let denom = k.min(candidates.len()).max(1);
        validity.push(top.iter().filter(|c| c.valid).count() as f64 / denom as f64);
    }
    Ok(TopkReport { ks: ks.to_vec(), hits, validity, candidates })
}
