//! Chemistry substrate: SMILES tokenization and parsing, molecular graphs,
//! deterministic SMILES writing, canonical keys, reactant/product alignment,
//! validity checking, dataset filters, conformers and 3D geometry features.
//!
//! Everything here is a pure function over immutable inputs; the module is
//! safe to use from parallel per-reaction preprocessing.

pub mod align;
pub mod canon;
pub mod conformer;
pub mod distance;
pub mod filter;
pub mod geometry;
pub mod graph;
pub mod parse;
pub mod samples;
pub mod token;
pub mod validity;
pub mod write;

pub use align::{build_sam, root_align, AlignmentMap, RootAligned};
pub use canon::canonical_key;
pub use conformer::{bind_conformer, read_conformer_file, synthetic_conformer, Conformer, ConformerAtom, ConformerRecord};
pub use distance::{distance_matrix, DistanceMatrix};
pub use filter::{dataset_filter, FilterOutcome, FilterReason, ReactionRecord};
pub use geometry::{geo_features, GeoFeatures, PairGeo};
pub use graph::{Atom, Bond, BondOrder, MolGraph};
pub use parse::parse;
pub use token::{atom_binding, tokenize, Token, TokenKind};
pub use validity::validity_check;
pub use write::{write, WriteOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChemError {
    /// Tokenizer/parser failure; `offset` is the byte position in the input.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("graph error: {0}")]
    Graph(String),
    #[error("conformer error: {0}")]
    Conformer(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("conformer record: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ChemError>;

/// Convenience: tokenize + parse in one step.
pub fn parse_smiles(smiles: &str) -> Result<MolGraph> {
    parse(&tokenize(smiles)?)
}
