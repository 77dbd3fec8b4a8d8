//! Syntax + valence validity check for generated SMILES.
//!
//! Not full chemistry: a candidate passes when it tokenizes, parses (which
//! enforces balanced rings, brackets and branches) and no atom exceeds a
//! basic valence table. Aromatic bonds count 1.5 and the per-atom bond sum
//! is rounded before comparison.

use crate::parse_smiles;
use crate::MolGraph;

/// Max allowed valence, or `None` for unconstrained elements.
fn valence_limit(element: &str, charge: i32) -> Option<u32> {
    match element {
        "C" => Some(4),
        "N" => {
            if charge > 0 {
                Some(4)
            } else {
                Some(3)
            }
        }
        "O" => Some(2),
        "F" | "Cl" | "Br" | "I" => Some(1),
        "S" => Some(6),
        "P" => Some(5),
        _ => None,
    }
}

pub fn validity_check(smiles: &str) -> bool {
    match parse_smiles(smiles) {
        Ok(graph) => valences_ok(&graph),
        Err(_) => false,
    }
}

pub(crate) fn valences_ok(graph: &MolGraph) -> bool {
    for (i, atom) in graph.atoms.iter().enumerate() {
        let Some(limit) = valence_limit(&atom.element, atom.charge) else {
            continue;
        };
        let used = graph.bond_order_sum(i).round() as u32 + u32::from(atom.explicit_h.unwrap_or(0));
        if used > limit {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_molecules_pass() {
        assert!(validity_check("CCO"));
        assert!(validity_check("c1ccccc1"));
        assert!(validity_check("CC(=O)Oc1ccccc1C(=O)O"));
    }

    #[test]
    fn unclosed_ring_fails() {
        assert!(!validity_check("C1CC"));
    }

    #[test]
    fn pentavalent_carbon_fails() {
        assert!(!validity_check("C(C)(C)(C)(C)C"));
    }

    #[test]
    fn charged_nitrogen_gets_four() {
        assert!(validity_check("[NH4+]"));
        assert!(validity_check("C[N+](C)(C)C"));
        assert!(!validity_check("CN(C)(C)C"));
    }

    #[test]
    fn halogen_single_bond_only() {
        assert!(validity_check("CCl"));
        assert!(!validity_check("C=[Cl:1]")); // bond order 2 on Cl
        assert!(!validity_check("ClC(Cl)Cl=C")); // Cl double-bonded
    }

    #[test]
    fn garbage_fails() {
        assert!(!validity_check("C(("));
        assert!(!validity_check("xyz"));
        assert!(!validity_check(")C"));
    }
}
