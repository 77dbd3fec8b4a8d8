//! SMILES writer: deterministic DFS emission from a chosen root atom.
//!
//! Neighbor order is ascending atom index by default; a priority vector
//! (used by canonicalization) overrides it. Ring-closure digits are
//! allocated smallest-first and recycled; closures beyond 9 use `%nn`.

use std::collections::HashMap;

use crate::graph::{Atom, BondOrder, MolGraph};
use crate::{ChemError, Result};

#[derive(Debug, Clone, Default)]
pub struct WriteOptions {
    /// Emit `:n` atom maps (off for canonical keys).
    pub strip_maps: bool,
    /// Neighbor/start ordering key per atom; lower comes first. Defaults to
    /// the atom index itself.
    pub priority: Option<Vec<usize>>,
}

/// Write the whole graph as SMILES starting the root's component at `root`.
/// Components are emitted in order of their smallest atom index, joined by
/// `.`; components not containing `root` start at their smallest-key atom.
pub fn write(graph: &MolGraph, root: usize) -> Result<String> {
    write_with(graph, root, &WriteOptions::default())
}

pub fn write_with(graph: &MolGraph, root: usize, opts: &WriteOptions) -> Result<String> {
    if root >= graph.atoms.len() {
        return Err(ChemError::Graph(format!(
            "root {} out of range for {} atoms",
            root,
            graph.atoms.len()
        )));
    }
    let key = |a: usize| opts.priority.as_ref().map_or(a, |p| p[a]);
    let mut parts = Vec::new();
    for comp in graph.components() {
        let start = if comp.contains(&root) {
            root
        } else {
            *comp.iter().min_by_key(|&&a| key(a)).unwrap()
        };
        parts.push(write_component(graph, start, opts));
    }
    Ok(parts.join("."))
}

/// Emit one connected component starting at `start`.
pub(crate) fn write_component(graph: &MolGraph, start: usize, opts: &WriteOptions) -> String {
    let key = |a: usize| opts.priority.as_ref().map_or(a, |p| p[a]);

    // Pre-pass DFS: classify tree edges vs ring closures in emission order.
    let n = graph.atoms.len();
    let mut visited = vec![false; n];
    let mut preorder = vec![usize::MAX; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    // Ring bonds as (earlier endpoint, later endpoint, order).
    let mut ring_bonds: Vec<(usize, usize, BondOrder)> = Vec::new();
    let mut counter = 0;
    // Stack frames: (atom, parent, neighbor list, cursor).
    let mut stack: Vec<(usize, usize, Vec<(usize, BondOrder)>, usize)> = Vec::new();
    let sorted_neighbors = |v: usize| {
        let mut ns = graph.neighbors(v);
        ns.sort_by_key(|&(u, _)| key(u));
        ns
    };
    visited[start] = true;
    preorder[start] = counter;
    counter += 1;
    stack.push((start, usize::MAX, sorted_neighbors(start), 0));
    while let Some(frame) = stack.last_mut() {
        let (v, parent, ns, cursor) = (frame.0, frame.1, frame.2.clone(), frame.3);
        if cursor >= ns.len() {
            stack.pop();
            continue;
        }
        frame.3 += 1;
        let (u, order) = ns[cursor];
        if u == parent {
            continue;
        }
        if visited[u] {
            if !ring_bonds.iter().any(|&(a, b, _)| (a == u && b == v) || (a == v && b == u)) {
                ring_bonds.push((u, v, order));
            }
        } else {
            visited[u] = true;
            preorder[u] = counter;
            counter += 1;
            children[v].push(u);
            stack.push((u, v, sorted_neighbors(u), 0));
        }
    }

    // Ring closures incident to each atom, ordered by the partner's preorder
    // position so emission is deterministic.
    let mut closures_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (idx, &(a, b, _)) in ring_bonds.iter().enumerate() {
        closures_at[a].push(idx);
        closures_at[b].push(idx);
    }
    for v in 0..n {
        closures_at[v].sort_by_key(|&idx| {
            let (a, b, _) = ring_bonds[idx];
            let partner = if a == v { b } else { a };
            preorder[partner]
        });
    }

    // Emission pass.
    let mut out = String::new();
    let mut open_digits: HashMap<usize, u32> = HashMap::new(); // ring idx -> digit
    let mut used_digits: Vec<bool> = vec![false; 100];
    let mut emit_stack: Vec<EmitStep> = vec![EmitStep::Atom { v: start, parent: usize::MAX }];
    while let Some(step) = emit_stack.pop() {
        match step {
            EmitStep::Text(s) => out.push_str(&s),
            EmitStep::Atom { v, parent } => {
                out.push_str(&atom_text(&graph.atoms[v], graph.hydrogen_count(v), opts.strip_maps));
                for &ridx in &closures_at[v] {
                    let (a, b, order) = ring_bonds[ridx];
                    let partner = if a == v { b } else { a };
                    match open_digits.remove(&ridx) {
                        Some(d) => {
                            out.push_str(&digit_text(d));
                            used_digits[d as usize] = false;
                        }
                        None => {
                            let d = (1..100).find(|&d| !used_digits[d as usize]).unwrap() as u32;
                            used_digits[d as usize] = true;
                            open_digits.insert(ridx, d);
                            out.push_str(bond_symbol(order, &graph.atoms[v], &graph.atoms[partner]));
                            out.push_str(&digit_text(d));
                        }
                    }
                }
                let kids = &children[v];
                // Push in reverse so the stack pops them in order.
                for (i, &c) in kids.iter().enumerate().rev() {
                    let order = graph.bond_between(v, c).unwrap();
                    let sym = bond_symbol(order, &graph.atoms[v], &graph.atoms[c]);
                    let last = i == kids.len() - 1;
                    if !last {
                        emit_stack.push(EmitStep::Text(")".into()));
                    }
                    emit_stack.push(EmitStep::Atom { v: c, parent: v });
                    if !last {
                        emit_stack.push(EmitStep::Text(format!("({}", sym)));
                    } else if !sym.is_empty() {
                        emit_stack.push(EmitStep::Text(sym.to_string()));
                    }
                }
                let _ = parent;
            }
        }
    }
    out
}

enum EmitStep {
    Atom { v: usize, parent: usize },
    Text(String),
}

fn digit_text(d: u32) -> String {
    if d < 10 {
        d.to_string()
    } else {
        format!("%{:02}", d)
    }
}

/// Bond symbol between two atoms. Single stays implicit except between two
/// aromatic atoms, where `-` disambiguates from the implicit aromatic bond.
fn bond_symbol(order: BondOrder, a: &Atom, b: &Atom) -> &'static str {
    match order {
        BondOrder::Single => {
            if a.aromatic && b.aromatic {
                "-"
            } else {
                ""
            }
        }
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => {
            if a.aromatic && b.aromatic {
                ""
            } else {
                ":"
            }
        }
    }
}

const ORGANIC_SUBSET: [&str; 10] = ["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"];
const AROMATIC_BARE_OK: [&str; 6] = ["B", "C", "N", "O", "P", "S"];

/// `hydrogens` is the atom's effective H count; when an implicit-H atom is
/// forced into brackets (by a map, charge, etc.) the count is written out so
/// the hydrogen semantics survive the round trip.
fn atom_text(atom: &Atom, hydrogens: u8, strip_maps: bool) -> String {
    let keep_map = !strip_maps && atom.atom_map.is_some();
    let bare_ok = atom.explicit_h.is_none()
        && atom.charge == 0
        && atom.isotope.is_none()
        && atom.chirality.is_none()
        && !keep_map
        && (atom.element == "*"
            || (ORGANIC_SUBSET.contains(&atom.element.as_str())
                && (!atom.aromatic || AROMATIC_BARE_OK.contains(&atom.element.as_str()))));
    let symbol = if atom.aromatic {
        let mut s = atom.element.clone();
        s[..1].make_ascii_lowercase();
        s
    } else {
        atom.element.clone()
    };
    if bare_ok {
        return symbol;
    }
    let mut s = String::from("[");
    if let Some(iso) = atom.isotope {
        s.push_str(&iso.to_string());
    }
    s.push_str(&symbol);
    match atom.chirality {
        Some(crate::graph::Chirality::Counterclockwise) => s.push('@'),
        Some(crate::graph::Chirality::Clockwise) => s.push_str("@@"),
        None => {}
    }
    match hydrogens {
        0 => {}
        1 => s.push('H'),
        h => s.push_str(&format!("H{}", h)),
    }
    match atom.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => s.push_str(&format!("+{}", c)),
        c => s.push_str(&format!("-{}", -c)),
    }
    if keep_map {
        s.push_str(&format!(":{}", atom.atom_map.unwrap()));
    }
    s.push(']');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::isomorphic_by_maps;
    use crate::parse_smiles;

    fn with_maps(mut g: MolGraph) -> MolGraph {
        for (i, a) in g.atoms.iter_mut().enumerate() {
            a.atom_map = Some(i as u32 + 1);
        }
        g
    }

    #[test]
    fn ethanol_rooted_at_oxygen() {
        let g = parse_smiles("CCO").unwrap();
        assert_eq!(write(&g, 2).unwrap(), "OCC");
        assert_eq!(write(&g, 0).unwrap(), "CCO");
    }

    #[test]
    fn triangle_reparses_from_any_root() {
        let g = with_maps(parse_smiles("C1CC1").unwrap());
        for root in 0..3 {
            let s = write(&g, root).unwrap();
            let back = parse_smiles(&s).unwrap();
            assert!(isomorphic_by_maps(&g, &back), "root {}: {}", root, s);
            assert_eq!(back.bonds.len(), 3);
        }
    }

    #[test]
    fn components_joined_by_dot() {
        let g = parse_smiles("CC.OC.N").unwrap();
        let s = write(&g, 0).unwrap();
        assert_eq!(s.matches('.').count(), 2);
        assert_eq!(parse_smiles(&s).unwrap().components().len(), 3);
    }

    #[test]
    fn branch_and_double_bond_round_trip() {
        let g = with_maps(parse_smiles("CC(=O)OC").unwrap());
        for root in 0..g.atoms.len() {
            let s = write(&g, root).unwrap();
            let back = parse_smiles(&s).unwrap();
            assert!(isomorphic_by_maps(&g, &back), "root {} gave {}", root, s);
        }
    }

    #[test]
    fn aromatic_ring_round_trip() {
        let g = with_maps(parse_smiles("c1ccc(CN)cc1").unwrap());
        for root in 0..g.atoms.len() {
            let s = write(&g, root).unwrap();
            let back = parse_smiles(&s).unwrap();
            assert!(isomorphic_by_maps(&g, &back), "root {} gave {}", root, s);
        }
    }

    #[test]
    fn fused_rings_round_trip() {
        // Naphthalene exercises digit reuse.
        let g = with_maps(parse_smiles("c1ccc2ccccc2c1").unwrap());
        for root in 0..g.atoms.len() {
            let s = write(&g, root).unwrap();
            let back = parse_smiles(&s).unwrap();
            assert!(isomorphic_by_maps(&g, &back), "root {} gave {}", root, s);
        }
    }

    #[test]
    fn bracket_fields_preserved() {
        let g = parse_smiles("[13CH3:9][O-]").unwrap();
        let s = write(&g, 0).unwrap();
        assert_eq!(s, "[13CH3:9][O-]");
        let canon = write_with(&g, 0, &WriteOptions { strip_maps: true, priority: None }).unwrap();
        assert_eq!(canon, "[13CH3][O-]");
    }
}
