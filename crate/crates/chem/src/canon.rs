//! Canonical molecule keys.
//!
//! Morgan-style iterative neighborhood refinement seeded on (element,
//! charge, degree, H count, aromaticity), followed by exhaustive splitting
//! of any remaining tied class (bounded), then a canonical DFS write with
//! atom maps stripped. The key is invariant under the atom ordering of the
//! input SMILES, so re-rooted writes of the same molecule collide exactly.

use std::collections::BTreeMap;

use crate::graph::MolGraph;
use crate::write::{write_component, WriteOptions};

const CANDIDATE_CAP: usize = 64;

/// Canonical key for a (possibly multi-component) molecule. Components are
/// canonicalized independently; their strings are sorted and joined with `.`
/// so the key is also invariant under component order.
pub fn canonical_key(graph: &MolGraph) -> String {
    let mut parts: Vec<String> = graph
        .components()
        .iter()
        .map(|comp| canonical_component(graph, comp))
        .collect();
    parts.sort();
    parts.join(".")
}

fn canonical_component(graph: &MolGraph, comp: &[usize]) -> String {
    let mut ranks = initial_ranks(graph, comp);
    refine(graph, comp, &mut ranks);
    let mut candidates = Vec::new();
    split_ties(graph, comp, &ranks, &mut candidates);
    candidates.into_iter().min().expect("at least one candidate")
}

/// Dense ranks from the seed invariant tuple.
fn initial_ranks(graph: &MolGraph, comp: &[usize]) -> BTreeMap<usize, usize> {
    let mut keyed: Vec<(_, usize)> = comp
        .iter()
        .map(|&v| {
            let a = &graph.atoms[v];
            (
                (
                    a.element.clone(),
                    a.charge,
                    graph.degree(v),
                    graph.hydrogen_count(v),
                    a.aromatic,
                ),
                v,
            )
        })
        .collect();
    keyed.sort();
    let mut ranks = BTreeMap::new();
    let mut rank = 0;
    for (i, (key, v)) in keyed.iter().enumerate() {
        if i > 0 && *key != keyed[i - 1].0 {
            rank = i;
        }
        ranks.insert(*v, rank);
    }
    ranks
}

/// Iterate neighborhood refinement until the partition stabilizes.
fn refine(graph: &MolGraph, comp: &[usize], ranks: &mut BTreeMap<usize, usize>) {
    loop {
        let mut keyed: Vec<((usize, Vec<(u8, usize)>), usize)> = comp
            .iter()
            .map(|&v| {
                let mut neigh: Vec<(u8, usize)> = graph
                    .neighbors(v)
                    .into_iter()
                    .map(|(u, order)| (order.code(), ranks[&u]))
                    .collect();
                neigh.sort();
                ((ranks[&v], neigh), v)
            })
            .collect();
        keyed.sort();
        let mut next = BTreeMap::new();
        let mut rank = 0;
        for (i, (key, v)) in keyed.iter().enumerate() {
            if i > 0 && *key != keyed[i - 1].0 {
                rank = i;
            }
            next.insert(*v, rank);
        }
        if next == *ranks {
            return;
        }
        *ranks = next;
    }
}

/// If classes remain tied, split each member of the first tied class in turn
/// and recurse, collecting one candidate string per fully-resolved ordering.
fn split_ties(
    graph: &MolGraph,
    comp: &[usize],
    ranks: &BTreeMap<usize, usize>,
    out: &mut Vec<String>,
) {
    if out.len() >= CANDIDATE_CAP {
        return;
    }
    // Find the smallest tied rank value.
    let mut by_rank: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &v in comp {
        by_rank.entry(ranks[&v]).or_default().push(v);
    }
    let tied = by_rank.iter().find(|(_, vs)| vs.len() > 1);
    match tied {
        None => {
            out.push(emit(graph, comp, ranks));
        }
        Some((_, members)) => {
            for &pick in members {
                if out.len() >= CANDIDATE_CAP {
                    return;
                }
                let mut split: BTreeMap<usize, usize> =
                    ranks.iter().map(|(&v, &r)| (v, r * 2 + 2)).collect();
                *split.get_mut(&pick).unwrap() -= 1;
                refine(graph, comp, &mut split);
                split_ties(graph, comp, &split, out);
            }
        }
    }
}

fn emit(graph: &MolGraph, comp: &[usize], ranks: &BTreeMap<usize, usize>) -> String {
    // Priority vector over the full graph; atoms outside the component are
    // never touched by the component write.
    let mut priority = vec![usize::MAX; graph.atoms.len()];
    for (&v, &r) in ranks {
        priority[v] = r;
    }
    let start = *comp.iter().min_by_key(|&&v| ranks[&v]).unwrap();
    let opts = WriteOptions { strip_maps: true, priority: Some(priority) };
    write_component(graph, start, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_smiles;

    #[test]
    fn same_molecule_same_key() {
        let a = parse_smiles("OCC").unwrap();
        let b = parse_smiles("CCO").unwrap();
        assert_eq!(canonical_key(&a), canonical_key(&b));
    }

    #[test]
    fn different_molecules_differ() {
        let a = parse_smiles("CCO").unwrap();
        let b = parse_smiles("CCN").unwrap();
        assert_ne!(canonical_key(&a), canonical_key(&b));
    }

    #[test]
    fn maps_do_not_affect_key() {
        let a = parse_smiles("[CH3:1][OH:2]").unwrap();
        let b = parse_smiles("[CH3:7][OH:9]").unwrap();
        assert_eq!(canonical_key(&a), canonical_key(&b));
    }

    #[test]
    fn component_order_irrelevant() {
        let a = parse_smiles("CCO.NC").unwrap();
        let b = parse_smiles("NC.CCO").unwrap();
        assert_eq!(canonical_key(&a), canonical_key(&b));
    }

    #[test]
    fn symmetric_molecules_resolve() {
        // Benzene and cyclohexane are fully symmetric: every re-rooting must
        // collapse to one key.
        for smiles in ["c1ccccc1", "C1CCCCC1", "CC(C)(C)C"] {
            let g = parse_smiles(smiles).unwrap();
            let reference = canonical_key(&g);
            for root in 0..g.atoms.len() {
                let rewritten = crate::write(&g, root).unwrap();
                let back = parse_smiles(&rewritten).unwrap();
                assert_eq!(canonical_key(&back), reference, "root {} of {}", root, smiles);
            }
        }
    }

    #[test]
    fn rerootings_collide_on_one_key() {
        for smiles in ["CC(=O)Oc1ccccc1C(=O)O", "CN1CCC[C@H]1c1cccnc1", "OC(=O)C(N)Cc1ccc(O)cc1"] {
            let g = parse_smiles(smiles).unwrap();
            let reference = canonical_key(&g);
            for root in 0..g.atoms.len() {
                let rewritten = crate::write(&g, root).unwrap();
                let back = parse_smiles(&rewritten).unwrap();
                assert_eq!(canonical_key(&back), reference, "root {} of {}", root, smiles);
            }
        }
    }
}
