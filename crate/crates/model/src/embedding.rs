//! Input-side embeddings: per-atom 3D position embeddings from simplified
//! geometric message passing, zero-padded alignment to token positions,
//! the learned fusion of 1D and 3D streams, and sinusoidal token positions.

use retro3d_chem::{GeoFeatures, MolGraph};
use retro3d_tensor::{concat_cols, concat_rows, Tensor};

use crate::config::ModelConfig;
use crate::params::ParamStore;
use crate::{ModelError, Result};

// ---------------------------------------------------------------------------
// Atom-type vocabulary
// ---------------------------------------------------------------------------

const ATOM_ELEMENTS: [&str; 25] = [
    "C", "N", "O", "S", "P", "B", "F", "Cl", "Br", "I", "Si", "Se", "Sn", "Li", "Na", "K", "Mg",
    "Ca", "Fe", "Zn", "Cu", "Mn", "Al", "H", "*",
];

/// Two rows per element (plain, aromatic) plus one unknown row.
pub const ATOM_TYPE_COUNT: usize = ATOM_ELEMENTS.len() * 2 + 1;

pub fn atom_type_id(element: &str, aromatic: bool) -> usize {
    match ATOM_ELEMENTS.iter().position(|&e| e == element) {
        Some(i) => 2 * i + usize::from(aromatic),
        None => ATOM_TYPE_COUNT - 1,
    }
}

// ---------------------------------------------------------------------------
// Geometric feature lift
// ---------------------------------------------------------------------------

/// Sinusoidal lift width: 4 features x 2 (sin, cos) x F frequencies.
pub fn lift_dim(config: &ModelConfig) -> usize {
    4 * 2 * config.geo_frequencies
}

/// Geometrically spaced frequencies covering bond-length and angle scales.
fn frequencies(count: usize) -> Vec<f64> {
    let (lo, hi) = (0.25f64, 8.0f64);
    (0..count)
        .map(|i| {
            if count == 1 {
                lo
            } else {
                lo * (hi / lo).powf(i as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

fn lift_features(values: [f64; 4], freqs: &[f64], out: &mut Vec<f64>) {
    for v in values {
        for &w in freqs {
            out.push((v * w).sin());
            out.push((v * w).cos());
        }
    }
}

// ---------------------------------------------------------------------------
// Simplified geometric message passing
// ---------------------------------------------------------------------------

/// Per-atom 3D position embeddings. Messages flow over bonded pairs using
/// the invariant features (d, theta, phi, tau); atoms without bonded
/// neighbors keep their initial type embedding untouched, so a single-atom
/// molecule returns exactly its learned atom-type row.
pub fn comenet_lite(
    graph: &MolGraph,
    geo: &GeoFeatures,
    params: &ParamStore,
    config: &ModelConfig,
) -> Result<Tensor> {
    let n = graph.atom_count();
    let ids: Vec<usize> =
        graph.atoms.iter().map(|a| atom_type_id(&a.element, a.aromatic)).collect();
    let mut state = params.get("atom_embed")?.embedding_lookup(&ids)?;

    let pairs = &geo.pairs;
    if pairs.is_empty() {
        return Ok(state);
    }
    for p in pairs {
        if graph.bond_between(p.i, p.j).is_none() {
            return Err(ModelError::Input(format!(
                "geometry features contain non-bonded pair ({}, {})",
                p.i, p.j
            )));
        }
    }
    let e = pairs.len();
    let freqs = frequencies(config.geo_frequencies);
    let lift = lift_dim(config);
    let mut lift_data = Vec::with_capacity(e * lift);
    for p in pairs {
        lift_features([p.d, p.theta, p.phi, p.tau], &freqs, &mut lift_data);
    }
    let lift_const = Tensor::from_vec(vec![e, lift], lift_data)?;

    let src_ids: Vec<usize> = pairs.iter().map(|p| p.j).collect();
    // Sum-aggregation matrix: row i accumulates messages addressed to i.
    let mut agg_data = vec![0.0; n * e];
    for (col, p) in pairs.iter().enumerate() {
        agg_data[p.i * e + col] = 1.0;
    }
    let agg_const = Tensor::from_vec(vec![n, e], agg_data)?;
    // Atoms with at least one bonded neighbor receive updates.
    let mut upd_mask = vec![0.0; n * n];
    for i in 0..n {
        if pairs.iter().any(|p| p.i == i) {
            upd_mask[i * n + i] = 1.0;
        }
    }
    let upd_mask = Tensor::from_vec(vec![n, n], upd_mask)?;

    for layer in 0..config.comenet_layers {
        let neighbor_states = state.embedding_lookup(&src_ids)?;
        let msg_in = concat_cols(&[&neighbor_states, &lift_const])?;
        let msg = linear(&msg_in, params, &format!("comenet.{layer}.msg.w1"), &format!("comenet.{layer}.msg.b1"))?
            .gelu()?;
        let msg = linear(&msg, params, &format!("comenet.{layer}.msg.w2"), &format!("comenet.{layer}.msg.b2"))?;
        let aggregated = agg_const.matmul(&msg)?;
        let upd_in = concat_cols(&[&state, &aggregated])?;
        let upd = linear(&upd_in, params, &format!("comenet.{layer}.upd.w1"), &format!("comenet.{layer}.upd.b1"))?
            .gelu()?;
        let upd = linear(&upd, params, &format!("comenet.{layer}.upd.w2"), &format!("comenet.{layer}.upd.b2"))?;
        let masked = upd_mask.matmul(&upd)?;
        state = state.add(&masked)?;
    }
    Ok(state)
}

pub(crate) fn linear(x: &Tensor, params: &ParamStore, w: &str, b: &str) -> Result<Tensor> {
    Ok(x.matmul(&params.get(w)?)?.add_bias(&params.get(b)?)?)
}

// ---------------------------------------------------------------------------
// Token alignment and fusion
// ---------------------------------------------------------------------------

/// Stretch per-atom embeddings to token positions: atom tokens take their
/// atom's row, every other position (bonds, branches, BOS/EOS) is exactly
/// zero.
pub fn pad_to_tokens(p3d: &Tensor, binding: &[Option<usize>]) -> Result<Tensor> {
    let n = p3d.shape()[0];
    let d = p3d.shape()[1];
    for b in binding.iter().flatten() {
        if *b >= n {
            return Err(ModelError::Input(format!(
                "token bound to atom {} but only {} embeddings exist",
                b, n
            )));
        }
    }
    let zero_row = Tensor::zeros(vec![1, d]);
    let table = concat_rows(&[p3d, &zero_row])?;
    let ids: Vec<usize> = binding.iter().map(|b| b.unwrap_or(n)).collect();
    Ok(table.embedding_lookup(&ids)?)
}

/// Learned fusion of the 3D and token embedding streams.
pub fn fuse(padded_p3d: &Tensor, token_emb: &Tensor, lambda1: &Tensor, lambda2: &Tensor) -> Result<Tensor> {
    if padded_p3d.shape() != token_emb.shape() {
        return Err(ModelError::Input(format!(
            "fusion shape mismatch: {:?} vs {:?}",
            padded_p3d.shape(),
            token_emb.shape()
        )));
    }
    Ok(padded_p3d.scale_by(lambda1)?.add(&token_emb.scale_by(lambda2)?)?)
}

/// Standard sin/cos interleaved position embedding with base 10000.
pub fn sinusoidal_pe(length: usize, dim: usize) -> Result<Tensor> {
    if dim % 2 != 0 {
        return Err(ModelError::Config(format!("sinusoidal dim {} must be even", dim)));
    }
    let mut data = Vec::with_capacity(length * dim);
    for pos in 0..length {
        for i in 0..dim / 2 {
            let rate = 1.0 / 10000f64.powf(2.0 * i as f64 / dim as f64);
            data.push((pos as f64 * rate).sin());
            data.push((pos as f64 * rate).cos());
        }
    }
    Ok(Tensor::from_vec(vec![length, dim], data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use retro3d_chem::geometry::{apply_rigid, random_rotation};
    use retro3d_chem::{geo_features, parse_smiles, synthetic_conformer, tokenize};
    use retro3d_tensor::{backward, scope, watch};

    fn micro() -> (ModelConfig, ParamStore) {
        let config = ModelConfig::micro(20);
        let params = ParamStore::init(&config, 3).unwrap();
        (config, params)
    }

    #[test]
    fn single_atom_returns_type_embedding() {
        let (config, params) = micro();
        let g = parse_smiles("C").unwrap();
        let conf = synthetic_conformer(&g, 1);
        let geo = geo_features(&g, &conf).unwrap();
        let out = comenet_lite(&g, &geo, &params, &config).unwrap();
        let expected = params
            .get("atom_embed")
            .unwrap()
            .embedding_lookup(&[atom_type_id("C", false)])
            .unwrap();
        assert_eq!(out.data(), expected.data());
    }

    #[test]
    fn rigid_transform_invariance() {
        let (config, params) = micro();
        let g = parse_smiles("CC(=O)OC1CCCC1").unwrap();
        let conf = synthetic_conformer(&g, 9);
        let base =
            comenet_lite(&g, &geo_features(&g, &conf).unwrap(), &params, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let rot = random_rotation(&mut rng);
            let moved = apply_rigid(&conf, &rot, [1.3, -0.8, 2.1]);
            let out =
                comenet_lite(&g, &geo_features(&g, &moved).unwrap(), &params, &config).unwrap();
            let drift = base
                .data()
                .iter()
                .zip(out.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(drift <= 1e-9, "embedding drift {}", drift);
        }
    }

    #[test]
    fn permutation_equivariance() {
        let (config, params) = micro();
        // Same molecule written from another root permutes atom indices;
        // matching rows through atom maps must agree.
        let g = parse_smiles("[CH3:1][C:2](=[O:3])[O:4][CH3:5]").unwrap();
        let conf = synthetic_conformer(&g, 4);
        let base = comenet_lite(&g, &geo_features(&g, &conf).unwrap(), &params, &config).unwrap();

        let rewritten = retro3d_chem::write(&g, 4).unwrap();
        let g2 = parse_smiles(&rewritten).unwrap();
        // Carry coordinates over through atom maps.
        let mut coords = vec![[0.0; 3]; g2.atom_count()];
        for (i2, a2) in g2.atoms.iter().enumerate() {
            let i1 = g
                .atoms
                .iter()
                .position(|a| a.atom_map == a2.atom_map)
                .expect("maps preserved");
            coords[i2] = conf.coords[i1];
        }
        let conf2 = retro3d_chem::Conformer { coords };
        let out = comenet_lite(&g2, &geo_features(&g2, &conf2).unwrap(), &params, &config).unwrap();

        let d = config.dim;
        for (i2, a2) in g2.atoms.iter().enumerate() {
            let i1 = g.atoms.iter().position(|a| a.atom_map == a2.atom_map).unwrap();
            let row1 = &base.data()[i1 * d..(i1 + 1) * d];
            let row2 = &out.data()[i2 * d..(i2 + 1) * d];
            let drift = row1
                .iter()
                .zip(row2)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(drift <= 1e-9, "atom map {:?} drift {}", a2.atom_map, drift);
        }
    }

    #[test]
    fn padding_zeroes_non_atom_rows() {
        let toks = tokenize("C=C").unwrap();
        let binding = retro3d_chem::atom_binding(&toks);
        let p3d = Tensor::from_vec(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let padded = pad_to_tokens(&p3d, &binding).unwrap();
        assert_eq!(padded.shape(), &[3, 3]);
        assert_eq!(&padded.data()[0..3], &[1.0, 2.0, 3.0]);
        assert_eq!(&padded.data()[3..6], &[0.0, 0.0, 0.0], "`=` row must be zero");
        assert_eq!(&padded.data()[6..9], &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn padding_rejects_unbound_atoms() {
        let binding = vec![Some(0), Some(5)];
        let p3d = Tensor::zeros(vec![2, 3]);
        assert!(pad_to_tokens(&p3d, &binding).is_err());
    }

    #[test]
    fn fuse_reductions() {
        let a = Tensor::from_vec(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = Tensor::from_vec(vec![2, 2], vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let zero = Tensor::scalar(0.0).unwrap();
        let one = Tensor::scalar(1.0).unwrap();
        let out = fuse(&a, &t, &zero, &one).unwrap();
        assert_eq!(out.data(), t.data());
        let out = fuse(&a, &t, &one, &zero).unwrap();
        assert_eq!(out.data(), a.data());
    }

    #[test]
    fn fuse_is_linear_in_first_argument() {
        let a = Tensor::from_vec(vec![1, 3], vec![1.0, -2.0, 0.5]).unwrap();
        let b = Tensor::from_vec(vec![1, 3], vec![0.2, 0.4, -0.6]).unwrap();
        let t = Tensor::from_vec(vec![1, 3], vec![3.0, 1.0, 2.0]).unwrap();
        let l1 = Tensor::scalar(0.7).unwrap();
        let l2 = Tensor::scalar(1.3).unwrap();
        let lhs = fuse(&a.add(&b).unwrap(), &t, &l1, &l2).unwrap();
        let rhs = fuse(&a, &t, &l1, &l2).unwrap().add(&b.scale(0.7).unwrap()).unwrap();
        for (x, y) in lhs.data().iter().zip(rhs.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fuse_lambda_gradient_matches_manual_sum() {
        let a = Tensor::from_vec(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let t = Tensor::from_vec(vec![2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let l1 = Tensor::scalar(0.9).unwrap();
        let l2 = Tensor::scalar(1.1).unwrap();
        scope(|| {
            let l1w = watch(&l1);
            let l2w = watch(&l2);
            let out = fuse(&a, &t, &l1w, &l2w).unwrap();
            let lossv = out.sum().unwrap();
            let grads = backward(&lossv).unwrap();
            // d/dl1 sum(l1*a + l2*t) = sum(a)
            assert!((grads.get(&l1w).unwrap()[0] - 10.0).abs() < 1e-12);
            assert!((grads.get(&l2w).unwrap()[0] - 1.0).abs() < 1e-12);
        });
    }

    #[test]
    fn sinusoidal_values() {
        let pe = sinusoidal_pe(4, 6).unwrap();
        // Position 0: sin 0 = 0, cos 0 = 1, interleaved.
        assert_eq!(&pe.data()[0..6], &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        // Position 1, first pair: (sin 1, cos 1).
        assert!((pe.data()[6] - 1f64.sin()).abs() < 1e-15);
        assert!((pe.data()[7] - 1f64.cos()).abs() < 1e-15);
        assert!(pe.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(sinusoidal_pe(4, 5).is_err());
    }

    #[test]
    fn zeroing_an_atom_row_only_touches_its_tokens() {
        let toks = tokenize("CC(=O)N").unwrap();
        let binding = retro3d_chem::atom_binding(&toks);
        let p3d = Tensor::from_vec(
            vec![4, 2],
            vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0],
        )
        .unwrap();
        let base = pad_to_tokens(&p3d, &binding).unwrap();
        // Zero atom 2 (the O).
        let mut data = p3d.data().to_vec();
        data[4] = 0.0;
        data[5] = 0.0;
        let altered = pad_to_tokens(&Tensor::from_vec(vec![4, 2], data).unwrap(), &binding).unwrap();
        for (t, b) in binding.iter().enumerate() {
            let row_a = &base.data()[t * 2..(t + 1) * 2];
            let row_b = &altered.data()[t * 2..(t + 1) * 2];
            if *b == Some(2) {
                assert_ne!(row_a, row_b);
            } else {
                assert_eq!(row_a, row_b, "token {} must be untouched", t);
            }
        }
    }
}
