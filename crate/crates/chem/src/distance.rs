//! Token-aligned 3D distance matrix.
//!
//! An M x M matrix over the SMILES tokens: atom-token pairs carry the
//! Euclidean distance between their atoms, every pair involving a non-atom
//! token is zero.

use crate::conformer::Conformer;
use crate::token::{atom_binding, tokenize};
use crate::{ChemError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub size: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Embed into a larger matrix with `pad_before` zero rows/cols in front
    /// and `pad_after` behind (for BOS/EOS framing).
    pub fn framed(&self, pad_before: usize, pad_after: usize) -> DistanceMatrix {
        let size = self.size + pad_before + pad_after;
        let mut values = vec![0.0; size * size];
        for i in 0..self.size {
            for j in 0..self.size {
                values[(i + pad_before) * size + (j + pad_before)] = self.get(i, j);
            }
        }
        DistanceMatrix { size, values }
    }
}

pub fn distance_matrix(smiles: &str, conformer: &Conformer) -> Result<DistanceMatrix> {
    let tokens = tokenize(smiles)?;
    let binding = atom_binding(&tokens);
    let atom_count = binding.iter().filter(|b| b.is_some()).count();
    if conformer.len() != atom_count {
        return Err(ChemError::Conformer(format!(
            "conformer has {} atoms, SMILES has {} atom tokens",
            conformer.len(),
            atom_count
        )));
    }
    let m = tokens.len();
    let mut values = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if let (Some(a), Some(b)) = (binding[i], binding[j]) {
                values[i * m + j] = conformer.distance(a, b);
            }
        }
    }
    Ok(DistanceMatrix { size: m, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let conf = Conformer { coords: vec![[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]] };
        let d = distance_matrix("CO", &conf).unwrap();
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 0), 5.0);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn non_atom_rows_are_zero() {
        let conf = Conformer { coords: vec![[0.0; 3], [1.0, 0.0, 0.0]] };
        let d = distance_matrix("C=C", &conf).unwrap();
        assert_eq!(d.size, 3);
        for k in 0..3 {
            assert_eq!(d.get(1, k), 0.0, "`=` row must be zero");
            assert_eq!(d.get(k, 1), 0.0, "`=` column must be zero");
        }
        assert_eq!(d.get(0, 2), 1.0);
    }

    #[test]
    fn count_mismatch_rejected() {
        let conf = Conformer { coords: vec![[0.0; 3]] };
        assert!(distance_matrix("CO", &conf).is_err());
    }

    #[test]
    fn framing_offsets() {
        let conf = Conformer { coords: vec![[0.0; 3], [2.0, 0.0, 0.0]] };
        let d = distance_matrix("CO", &conf).unwrap().framed(1, 1);
        assert_eq!(d.size, 4);
        assert_eq!(d.get(1, 2), 2.0);
        assert_eq!(d.get(0, 1), 0.0);
        assert_eq!(d.get(3, 2), 0.0);
    }
}
