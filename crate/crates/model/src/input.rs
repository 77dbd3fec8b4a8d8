//! What one training/inference example looks like to the network.

use retro3d_chem::{AlignmentMap, DistanceMatrix, GeoFeatures, MolGraph};

/// 3D conditioning for the encoder. Absent in "zero mode" (no conformer):
/// the model then degrades gracefully to a vanilla transformer with zero
/// position embeddings and zero distance weights.
#[derive(Debug, Clone)]
pub struct Spatial3D {
    pub graph: MolGraph,
    pub geo: GeoFeatures,
    /// Distance matrix over the framed product token positions (BOS/EOS
    /// rows zero).
    pub distance: DistanceMatrix,
}

/// A fully assembled example in id space.
#[derive(Debug, Clone)]
pub struct ModelInput {
    /// Product ids framed BOS ... EOS.
    pub product_ids: Vec<usize>,
    /// Framed token -> atom binding (None at BOS/EOS and non-atom tokens).
    pub binding: Vec<Option<usize>>,
    pub spatial: Option<Spatial3D>,
    /// Reactant ids framed BOS ... EOS (needed for training, empty for
    /// pure encoding).
    pub reactant_ids: Vec<usize>,
    /// Alignment matrix in raw (unframed) token coordinates:
    /// reactant tokens x product tokens.
    pub sam: Option<AlignmentMap>,
    pub id: String,
}

impl ModelInput {
    pub fn product_len(&self) -> usize {
        self.product_ids.len()
    }
}
