//! Molecular graph types.

use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn value(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }

    /// Stable small integer for invariant tuples and table lookups.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chirality {
    /// `@`
    Counterclockwise,
    /// `@@`
    Clockwise,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub element: String,
    pub aromatic: bool,
    pub charge: i32,
    /// `Some(n)` for bracket atoms (which always pin their H count),
    /// `None` for organic-subset atoms with implicit hydrogens.
    pub explicit_h: Option<u8>,
    /// Stored as written; not stereochemically interpreted.
    pub chirality: Option<Chirality>,
    pub isotope: Option<u16>,
    pub atom_map: Option<u32>,
}

impl Atom {
    pub fn bare(element: &str, aromatic: bool) -> Atom {
        Atom {
            element: element.to_string(),
            aromatic,
            charge: 0,
            explicit_h: None,
            chirality: None,
            isotope: None,
            atom_map: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

impl MolGraph {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Neighbors of `i` with bond orders, ascending by neighbor index.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, BondOrder)> {
        let mut out: Vec<(usize, BondOrder)> = self
            .bonds
            .iter()
            .filter_map(|b| {
                if b.a == i {
                    Some((b.b, b.order))
                } else if b.b == i {
                    Some((b.a, b.order))
                } else {
                    None
                }
            })
            .collect();
        out.sort_by_key(|&(n, _)| n);
        out
    }

    pub fn bond_between(&self, i: usize, j: usize) -> Option<BondOrder> {
        self.bonds
            .iter()
            .find(|b| (b.a == i && b.b == j) || (b.a == j && b.b == i))
            .map(|b| b.order)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.bonds.iter().filter(|b| b.a == i || b.b == i).count()
    }

    /// Sum of bond orders at atom `i`, aromatic counted as 1.5.
    pub fn bond_order_sum(&self, i: usize) -> f64 {
        self.bonds
            .iter()
            .filter(|b| b.a == i || b.b == i)
            .map(|b| b.order.value())
            .sum()
    }

    /// Connected components as sorted atom-index lists, ordered by their
    /// smallest atom index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = BTreeSet::new();
            seen[start] = true;
            comp.insert(start);
            while let Some(v) = stack.pop() {
                for (u, _) in self.neighbors(v) {
                    if !seen[u] {
                        seen[u] = true;
                        comp.insert(u);
                        stack.push(u);
                    }
                }
            }
            out.push(comp.into_iter().collect());
        }
        out
    }

    /// Hydrogen count used by canonicalization and validity: the explicit
    /// count for bracket atoms, otherwise the standard implicit fill-up for
    /// neutral organic-subset atoms.
    pub fn hydrogen_count(&self, i: usize) -> u8 {
        if let Some(h) = self.atoms[i].explicit_h {
            return h;
        }
        let used = self.bond_order_sum(i).ceil() as i32;
        let candidates: &[i32] = match self.atoms[i].element.as_str() {
            "B" => &[3],
            "C" => &[4],
            "N" => &[3],
            "O" => &[2],
            "P" => &[3, 5],
            "S" => &[2, 4, 6],
            "F" | "Cl" | "Br" | "I" => &[1],
            _ => return 0,
        };
        for &v in candidates {
            if used <= v {
                return (v - used) as u8;
            }
        }
        0
    }
}

/// Graph equality up to atom relabeling, matched through atom-map numbers.
/// Requires every atom on both sides to carry a map; compares per-atom fields
/// and the bond multiset under the map-induced correspondence.
pub fn isomorphic_by_maps(a: &MolGraph, b: &MolGraph) -> bool {
    if a.atoms.len() != b.atoms.len() || a.bonds.len() != b.bonds.len() {
        return false;
    }
    let index_of = |g: &MolGraph| -> Option<HashMap<u32, usize>> {
        let mut m = HashMap::new();
        for (i, atom) in g.atoms.iter().enumerate() {
            let key = atom.atom_map?;
            if m.insert(key, i).is_some() {
                return None; // duplicate map
            }
        }
        Some(m)
    };
    let (ma, mb) = match (index_of(a), index_of(b)) {
        (Some(x), Some(y)) => (x, y),
        _ => return false,
    };
    if ma.len() != mb.len() {
        return false;
    }
    for (key, &ia) in &ma {
        let Some(&ib) = mb.get(key) else { return false };
        let (x, y) = (&a.atoms[ia], &b.atoms[ib]);
        // Hydrogens compare by effective count: an implicit-H atom and its
        // bracketed rewrite are the same atom.
        if x.element != y.element
            || x.aromatic != y.aromatic
            || x.charge != y.charge
            || a.hydrogen_count(ia) != b.hydrogen_count(ib)
            || x.isotope != y.isotope
        {
            return false;
        }
    }
    let bond_set = |g: &MolGraph| -> BTreeSet<(u32, u32, u8)> {
        g.bonds
            .iter()
            .map(|b| {
                let ka = g.atoms[b.a].atom_map.unwrap();
                let kb = g.atoms[b.b].atom_map.unwrap();
                (ka.min(kb), ka.max(kb), b.order.code())
            })
            .collect()
    };
    bond_set(a) == bond_set(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn implicit_hydrogens() {
        // CH4
        let g = MolGraph { atoms: vec![Atom::bare("C", false)], bonds: vec![] };
        assert_eq!(g.hydrogen_count(0), 4);
        // CH3-CH3
        let g = MolGraph {
            atoms: vec![Atom::bare("C", false), Atom::bare("C", false)],
            bonds: vec![Bond { a: 0, b: 1, order: BondOrder::Single }],
        };
        assert_eq!(g.hydrogen_count(0), 3);
    }

    #[test]
    fn components_split() {
        let g = MolGraph {
            atoms: vec![Atom::bare("C", false), Atom::bare("O", false), Atom::bare("N", false)],
            bonds: vec![Bond { a: 2, b: 1, order: BondOrder::Single }],
        };
        let comps = g.components();
        assert_eq!(comps, vec![vec![0], vec![1, 2]]);
    }
}
