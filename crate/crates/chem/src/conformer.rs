//! Conformer ingestion and the deterministic synthetic embedder.
//!
//! Coordinates are inputs, not computed chemistry: any generator can feed
//! the model. The file format is JSON lines, one record per molecule:
//! `{"id": "...", "atoms": [{"map": 3, "element": "C", "xyz": [x, y, z]}]}`
//! with ångström units. Records bind to parsed atoms by atom map when both
//! sides are fully mapped, otherwise by position.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::MolGraph;
use crate::{ChemError, Result};

/// Per-atom 3D coordinates, indexed like the owning graph's atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Conformer {
    pub coords: Vec<[f64; 3]>,
}

impl Conformer {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let a = self.coords[i];
        let b = self.coords[j];
        let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformerAtom {
    pub map: Option<u32>,
    pub element: String,
    pub xyz: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformerRecord {
    pub id: String,
    pub atoms: Vec<ConformerAtom>,
}

/// Read a JSON-lines conformer file keyed by record id.
pub fn read_conformer_file(path: &Path) -> Result<HashMap<String, ConformerRecord>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = HashMap::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ConformerRecord = serde_json::from_str(&line)?;
        out.insert(record.id.clone(), record);
    }
    Ok(out)
}

/// Bind a record's coordinates to a parsed graph's atom indices.
pub fn bind_conformer(record: &ConformerRecord, graph: &MolGraph) -> Result<Conformer> {
    if record.atoms.len() != graph.atom_count() {
        return Err(ChemError::Conformer(format!(
            "record has {} atoms, molecule has {}",
            record.atoms.len(),
            graph.atom_count()
        )));
    }
    for a in &record.atoms {
        if !a.xyz.iter().all(|v| v.is_finite()) {
            return Err(ChemError::Conformer("non-finite coordinate".into()));
        }
    }
    let all_record_mapped = record.atoms.iter().all(|a| a.map.is_some());
    let all_graph_mapped = graph.atoms.iter().all(|a| a.atom_map.is_some());
    let mut coords = vec![[0.0; 3]; graph.atom_count()];
    if all_record_mapped && all_graph_mapped {
        let mut by_map: HashMap<u32, &ConformerAtom> = HashMap::new();
        for a in &record.atoms {
            if by_map.insert(a.map.unwrap(), a).is_some() {
                return Err(ChemError::Conformer(format!(
                    "duplicate map {} in conformer record",
                    a.map.unwrap()
                )));
            }
        }
        for (i, atom) in graph.atoms.iter().enumerate() {
            let m = atom.atom_map.unwrap();
            let rec = by_map.get(&m).ok_or_else(|| {
                ChemError::Conformer(format!("no coordinates for atom map {}", m))
            })?;
            if rec.element != atom.element {
                return Err(ChemError::Conformer(format!(
                    "element mismatch at map {}: {} vs {}",
                    m, rec.element, atom.element
                )));
            }
            coords[i] = rec.xyz;
        }
    } else {
        for (i, (rec, atom)) in record.atoms.iter().zip(&graph.atoms).enumerate() {
            if rec.element != atom.element {
                return Err(ChemError::Conformer(format!(
                    "element mismatch at position {}: {} vs {}",
                    i, rec.element, atom.element
                )));
            }
            coords[i] = rec.xyz;
        }
    }
    Ok(Conformer { coords })
}

const ITERATIONS: usize = 200;
const BOND_TARGET: f64 = 1.5;
const NONBOND_TARGET: f64 = 2.2;

/// Deterministic spring embedding in 3D: bonded pairs relax toward 1.5 A,
/// non-bonded pairs are pushed apart when closer than 2.2 A, for a fixed
/// 200 iterations. Same (graph, seed) gives bitwise identical coordinates.
pub fn synthetic_conformer(graph: &MolGraph, seed: u64) -> Conformer {
    let n = graph.atom_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = (n as f64).cbrt() * 1.2 + 0.5;
    let mut coords: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            [
                rng.random_range(-spread..spread),
                rng.random_range(-spread..spread),
                rng.random_range(-spread..spread),
            ]
        })
        .collect();
    if n <= 1 {
        return Conformer { coords: vec![[0.0; 3]; n] };
    }

    let bonded: Vec<(usize, usize)> = graph.bonds.iter().map(|b| (b.a, b.b)).collect();
    let mut nonbonded = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if graph.bond_between(i, j).is_none() {
                nonbonded.push((i, j));
            }
        }
    }

    for it in 0..ITERATIONS {
        let relax = 0.5 * (1.0 - it as f64 / (2.0 * ITERATIONS as f64));
        for &(i, j) in &bonded {
            apply_pair(&mut coords, i, j, BOND_TARGET, relax, true, &mut rng);
        }
        for &(i, j) in &nonbonded {
            apply_pair(&mut coords, i, j, NONBOND_TARGET, relax * 0.5, false, &mut rng);
        }
    }
    Conformer { coords }
}

/// Move a pair toward (`attract`) or only apart from (`!attract`) `target`.
fn apply_pair(
    coords: &mut [[f64; 3]],
    i: usize,
    j: usize,
    target: f64,
    relax: f64,
    attract: bool,
    rng: &mut ChaCha8Rng,
) {
    let mut d = [
        coords[j][0] - coords[i][0],
        coords[j][1] - coords[i][1],
        coords[j][2] - coords[i][2],
    ];
    let mut dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if dist < 1e-9 {
        // Coincident points: split along a seeded random direction.
        d = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt().max(1e-9);
    }
    if !attract && dist >= target {
        return;
    }
    let correction = (dist - target) / dist * 0.5 * relax;
    for k in 0..3 {
        coords[i][k] += d[k] * correction;
        coords[j][k] -= d[k] * correction;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_smiles;

    #[test]
    fn bonded_pair_lands_in_band() {
        let g = parse_smiles("CO").unwrap();
        let c = synthetic_conformer(&g, 7);
        let d = c.distance(0, 1);
        assert!((1.2..=1.8).contains(&d), "relaxed bond length {}", d);
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let g = parse_smiles("CC(=O)OC").unwrap();
        let a = synthetic_conformer(&g, 42);
        let b = synthetic_conformer(&g, 42);
        assert_eq!(a.coords, b.coords);
        let c = synthetic_conformer(&g, 43);
        assert_ne!(a.coords, c.coords);
    }

    #[test]
    fn triangle_is_noncollinear() {
        let g = parse_smiles("C1CC1").unwrap();
        let c = synthetic_conformer(&g, 5);
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(c.distance(i, j) > 0.5);
            }
        }
        // Rank of the centered coordinate matrix must be >= 2: the cross
        // product of the two edge vectors is nonzero.
        let e1 = [
            c.coords[1][0] - c.coords[0][0],
            c.coords[1][1] - c.coords[0][1],
            c.coords[1][2] - c.coords[0][2],
        ];
        let e2 = [
            c.coords[2][0] - c.coords[0][0],
            c.coords[2][1] - c.coords[0][1],
            c.coords[2][2] - c.coords[0][2],
        ];
        let cross = [
            e1[1] * e2[2] - e1[2] * e2[1],
            e1[2] * e2[0] - e1[0] * e2[2],
            e1[0] * e2[1] - e1[1] * e2[0],
        ];
        let norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        assert!(norm > 1e-3, "triangle collapsed to a line (|cross| = {})", norm);
    }

    #[test]
    fn binding_by_map_permutes_correctly() {
        let g = parse_smiles("[CH3:2][OH:1]").unwrap();
        let record = ConformerRecord {
            id: "x".into(),
            atoms: vec![
                ConformerAtom { map: Some(1), element: "O".into(), xyz: [9.0, 0.0, 0.0] },
                ConformerAtom { map: Some(2), element: "C".into(), xyz: [1.0, 0.0, 0.0] },
            ],
        };
        let bound = bind_conformer(&record, &g).unwrap();
        assert_eq!(bound.coords[0], [1.0, 0.0, 0.0]); // atom 0 is the C with map 2
        assert_eq!(bound.coords[1], [9.0, 0.0, 0.0]);
    }

    #[test]
    fn count_mismatch_is_error() {
        let g = parse_smiles("CO").unwrap();
        let record = ConformerRecord {
            id: "x".into(),
            atoms: vec![
                ConformerAtom { map: None, element: "C".into(), xyz: [0.0; 3] },
                ConformerAtom { map: None, element: "O".into(), xyz: [1.0, 0.0, 0.0] },
                ConformerAtom { map: None, element: "O".into(), xyz: [2.0, 0.0, 0.0] },
            ],
        };
        assert!(bind_conformer(&record, &g).is_err());
    }

    #[test]
    fn positional_binding_when_unmapped() {
        let g = parse_smiles("CO").unwrap();
        let record = ConformerRecord {
            id: "x".into(),
            atoms: vec![
                ConformerAtom { map: None, element: "C".into(), xyz: [0.0; 3] },
                ConformerAtom { map: None, element: "O".into(), xyz: [1.4, 0.0, 0.0] },
            ],
        };
        let bound = bind_conformer(&record, &g).unwrap();
        assert_eq!(bound.coords[1], [1.4, 0.0, 0.0]);
    }
}
