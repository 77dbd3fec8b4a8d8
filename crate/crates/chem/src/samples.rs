//! Seeded random molecule generation for tests and demos.
//!
//! Produces connected, valence-respecting graphs from a mix of chain
//! growth, ring closures and aromatic ring seeds. Same (seed, size) gives
//! the same molecule.

use rand::Rng;

use crate::graph::{Atom, Bond, BondOrder, MolGraph};

fn max_valence(element: &str) -> f64 {
    match element {
        "C" => 4.0,
        "N" => 3.0,
        "O" => 2.0,
        "S" => 2.0,
        "F" | "Cl" | "Br" | "I" => 1.0,
        _ => 4.0,
    }
}

fn free_valence(g: &MolGraph, i: usize) -> f64 {
    max_valence(&g.atoms[i].element) - g.bond_order_sum(i)
}

/// Random molecule with roughly `size` heavy atoms.
pub fn random_molecule(rng: &mut impl Rng, size: usize) -> MolGraph {
    let mut g = MolGraph::default();

    // Sometimes seed with an aromatic six-ring.
    if size >= 6 && rng.random_bool(0.35) {
        let hetero = rng.random_bool(0.4);
        for k in 0..6 {
            let elem = if hetero && k == 0 { "N" } else { "C" };
            g.atoms.push(Atom::bare(elem, true));
        }
        for k in 0..6 {
            g.bonds.push(Bond { a: k, b: (k + 1) % 6, order: BondOrder::Aromatic });
        }
    } else {
        g.atoms.push(Atom::bare("C", false));
    }

    while g.atoms.len() < size {
        // Pick an attachment point with free valence.
        let candidates: Vec<usize> =
            (0..g.atoms.len()).filter(|&i| free_valence(&g, i) >= 1.0).collect();
        let Some(&host) = candidates.get(rng.random_range(0..candidates.len().max(1))) else {
            break;
        };
        let roll: f64 = rng.random_range(0.0..1.0);
        let element = if roll < 0.62 {
            "C"
        } else if roll < 0.75 {
            "N"
        } else if roll < 0.88 {
            "O"
        } else if roll < 0.92 {
            "S"
        } else if roll < 0.95 {
            "F"
        } else if roll < 0.98 {
            "Cl"
        } else {
            "Br"
        };
        let idx = g.atoms.len();
        g.atoms.push(Atom::bare(element, false));
        let host_free = free_valence(&g, host);
        let new_free = max_valence(element);
        let order = if host_free >= 2.0 && new_free >= 2.0 && rng.random_bool(0.15) {
            BondOrder::Double
        } else {
            BondOrder::Single
        };
        g.bonds.push(Bond { a: host, b: idx, order });
    }

    // Occasionally close a ring between non-adjacent atoms with free valence.
    if rng.random_bool(0.45) {
        let n = g.atoms.len();
        'outer: for _ in 0..8 {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j || g.bond_between(i, j).is_some() {
                continue;
            }
            if g.atoms[i].aromatic || g.atoms[j].aromatic {
                continue;
            }
            if free_valence(&g, i) >= 1.0 && free_valence(&g, j) >= 1.0 {
                g.bonds.push(Bond { a: i.min(j), b: i.max(j), order: BondOrder::Single });
                break 'outer;
            }
        }
    }
    g
}

/// Assign atom maps 1..=N in index order (returns a copy).
pub fn with_atom_maps(graph: &MolGraph) -> MolGraph {
    let mut g = graph.clone();
    for (i, a) in g.atoms.iter_mut().enumerate() {
        a.atom_map = Some(i as u32 + 1);
    }
    g
}
