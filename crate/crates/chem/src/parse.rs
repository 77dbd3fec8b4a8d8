//! SMILES parser: token stream to molecular graph.
//!
//! Atoms are created in token order, so the k-th atom token always becomes
//! atom index k (the binding assumed by [`crate::token::atom_binding`]).

use std::collections::HashMap;

use crate::graph::{Atom, Bond, BondOrder, Chirality, MolGraph};
use crate::token::{Token, TokenKind};
use crate::{ChemError, Result};

const AROMATIC_BRACKET: [&str; 8] = ["b", "c", "n", "o", "p", "s", "se", "as"];

pub fn parse(tokens: &[Token]) -> Result<MolGraph> {
    let mut graph = MolGraph::default();
    let mut prev: Option<usize> = None;
    let mut pending: Option<BondOrder> = None;
    let mut branch_stack: Vec<usize> = Vec::new();
    // Open ring closures: number -> (atom, explicit order at open site).
    let mut open_rings: HashMap<u32, (usize, Option<BondOrder>)> = HashMap::new();

    for (pos, tok) in tokens.iter().enumerate() {
        match tok.kind {
            TokenKind::Atom | TokenKind::BracketAtom => {
                let atom = if tok.kind == TokenKind::Atom {
                    bare_atom(&tok.text, pos)?
                } else {
                    bracket_atom(&tok.text, pos)?
                };
                let idx = graph.atoms.len();
                graph.atoms.push(atom);
                if let Some(p) = prev {
                    let order = pending.take().unwrap_or_else(|| default_order(&graph, p, idx));
                    push_bond(&mut graph, p, idx, order, pos)?;
                }
                pending = None;
                prev = Some(idx);
            }
            TokenKind::Bond => {
                if pending.is_some() {
                    return Err(err(pos, "two bond symbols in a row"));
                }
                if prev.is_none() {
                    return Err(err(pos, "bond symbol with no preceding atom"));
                }
                pending = Some(bond_order(&tok.text, pos)?);
            }
            TokenKind::RingBond => {
                let n = ring_number(&tok.text);
                let here = prev.ok_or_else(|| err(pos, "ring closure with no preceding atom"))?;
                match open_rings.remove(&n) {
                    Some((there, open_order)) => {
                        let close_order = pending.take();
                        let order = match (open_order, close_order) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(err(pos, "conflicting bond orders on ring closure"));
                            }
                            (Some(a), _) => a,
                            (None, Some(b)) => b,
                            (None, None) => default_order(&graph, there, here),
                        };
                        push_bond(&mut graph, there, here, order, pos)?;
                    }
                    None => {
                        open_rings.insert(n, (here, pending.take()));
                    }
                }
            }
            TokenKind::Branch => {
                if tok.text == "(" {
                    let p = prev.ok_or_else(|| err(pos, "branch opened before any atom"))?;
                    if pending.is_some() {
                        return Err(err(pos, "bond symbol before '('"));
                    }
                    branch_stack.push(p);
                } else {
                    if pending.is_some() {
                        return Err(err(pos, "dangling bond before ')'"));
                    }
                    prev = Some(
                        branch_stack.pop().ok_or_else(|| err(pos, "unmatched ')'"))?,
                    );
                }
            }
            TokenKind::Dot => {
                if pending.is_some() {
                    return Err(err(pos, "bond symbol before '.'"));
                }
                prev = None;
            }
            TokenKind::Special => {
                return Err(err(pos, "special token inside a SMILES body"));
            }
        }
    }

    if let Some((&n, _)) = open_rings.iter().min_by_key(|(n, _)| **n) {
        return Err(ChemError::Parse {
            offset: tokens.len(),
            message: format!("unclosed ring bond {}", n),
        });
    }
    if !branch_stack.is_empty() {
        return Err(ChemError::Parse {
            offset: tokens.len(),
            message: "dangling branch: unclosed '('".into(),
        });
    }
    if pending.is_some() {
        return Err(ChemError::Parse {
            offset: tokens.len(),
            message: "dangling bond at end of input".into(),
        });
    }
    Ok(graph)
}

fn err(pos: usize, message: &str) -> ChemError {
    ChemError::Parse { offset: pos, message: message.to_string() }
}

fn push_bond(graph: &mut MolGraph, a: usize, b: usize, order: BondOrder, pos: usize) -> Result<()> {
    if a == b {
        return Err(err(pos, "self-loop bond"));
    }
    if graph.bond_between(a, b).is_some() {
        return Err(err(pos, "duplicate bond between atom pair"));
    }
    graph.bonds.push(Bond { a, b, order });
    Ok(())
}

/// Implicit bond order: aromatic when both ends are aromatic, else single.
fn default_order(graph: &MolGraph, a: usize, b: usize) -> BondOrder {
    if graph.atoms[a].aromatic && graph.atoms[b].aromatic {
        BondOrder::Aromatic
    } else {
        BondOrder::Single
    }
}

fn bond_order(text: &str, pos: usize) -> Result<BondOrder> {
    Ok(match text {
        // Directional bonds are preserved textually by the tokenizer but
        // carry no stereo semantics in the graph.
        "-" | "/" | "\\" | "~" => BondOrder::Single,
        "=" => BondOrder::Double,
        "#" => BondOrder::Triple,
        ":" => BondOrder::Aromatic,
        _ => return Err(err(pos, "unknown bond symbol")),
    })
}

fn ring_number(text: &str) -> u32 {
    if let Some(stripped) = text.strip_prefix('%') {
        stripped.parse().unwrap()
    } else {
        text.parse().unwrap()
    }
}

fn bare_atom(text: &str, pos: usize) -> Result<Atom> {
    let aromatic = text.chars().next().is_some_and(|c| c.is_ascii_lowercase());
    let element = if aromatic {
        let mut e = text.to_string();
        e[..1].make_ascii_uppercase();
        e
    } else {
        text.to_string()
    };
    if element == "*" {
        return Ok(Atom::bare("*", false));
    }
    match element.as_str() {
        "B" | "C" | "N" | "O" | "P" | "S" | "F" | "Cl" | "Br" | "I" => {
            Ok(Atom::bare(&element, aromatic))
        }
        _ => Err(err(pos, "atom outside organic subset must be bracketed")),
    }
}

/// Parse `[isotope? element chirality? Hcount? charge? :map?]`.
fn bracket_atom(text: &str, pos: usize) -> Result<Atom> {
    let inner = &text[1..text.len() - 1];
    let bytes = inner.as_bytes();
    let mut i = 0;

    let mut isotope = None;
    let iso_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i > iso_start {
        let v: u32 = inner[iso_start..i]
            .parse()
            .map_err(|_| err(pos, "isotope out of range"))?;
        if v > u16::MAX as u32 {
            return Err(err(pos, "isotope out of range"));
        }
        isotope = Some(v as u16);
    }

    // Element: one letter plus optional lowercase second letter, or the
    // aromatic lowercase forms, or the wildcard.
    if i >= bytes.len() {
        return Err(err(pos, "bracket atom missing element"));
    }
    let (element, aromatic) = {
        let c0 = bytes[i] as char;
        if c0 == '*' {
            i += 1;
            ("*".to_string(), false)
        } else if c0.is_ascii_uppercase() {
            let mut end = i + 1;
            if end < bytes.len() && (bytes[end] as char).is_ascii_lowercase() {
                // Two-letter element, but not when the next char starts a
                // field like the hydrogen marker ('H' is uppercase, so only
                // lowercase continuation is claimed here).
                end += 1;
            }
            let e = inner[i..end].to_string();
            i = end;
            (e, false)
        } else if c0.is_ascii_lowercase() {
            let mut end = i + 1;
            if end < bytes.len() && (bytes[end] as char).is_ascii_lowercase() {
                let two = &inner[i..end + 1];
                if AROMATIC_BRACKET.contains(&two) {
                    end += 1;
                }
            }
            let candidate = &inner[i..end];
            if !AROMATIC_BRACKET.contains(&candidate) {
                return Err(err(pos, "unknown aromatic element in bracket"));
            }
            let mut e = candidate.to_string();
            e[..1].make_ascii_uppercase();
            i = end;
            (e, true)
        } else {
            return Err(err(pos, "bracket atom missing element"));
        }
    };

    let mut chirality = None;
    if i < bytes.len() && bytes[i] == b'@' {
        if i + 1 < bytes.len() && bytes[i + 1] == b'@' {
            chirality = Some(Chirality::Clockwise);
            i += 2;
        } else {
            chirality = Some(Chirality::Counterclockwise);
            i += 1;
        }
    }

    let mut explicit_h: u8 = 0;
    if i < bytes.len() && bytes[i] == b'H' {
        i += 1;
        let d_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        explicit_h = if i > d_start {
            inner[d_start..i].parse().map_err(|_| err(pos, "H count out of range"))?
        } else {
            1
        };
    }

    let mut charge: i32 = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        let sign: i32 = if bytes[i] == b'+' { 1 } else { -1 };
        let symbol = bytes[i];
        let mut count = 1;
        i += 1;
        while i < bytes.len() && bytes[i] == symbol {
            count += 1;
            i += 1;
        }
        let d_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i > d_start {
            if count > 1 {
                return Err(err(pos, "charge uses either repeats or digits, not both"));
            }
            count = inner[d_start..i].parse().map_err(|_| err(pos, "charge out of range"))?;
        }
        charge = sign * count;
    }

    let mut atom_map = None;
    if i < bytes.len() && bytes[i] == b':' {
        i += 1;
        let d_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == d_start {
            return Err(err(pos, "atom map ':' without digits"));
        }
        atom_map =
            Some(inner[d_start..i].parse().map_err(|_| err(pos, "atom map out of range"))?);
    }

    if i != bytes.len() {
        return Err(err(pos, "unexpected characters in bracket atom"));
    }

    Ok(Atom {
        element,
        aromatic,
        charge,
        explicit_h: Some(explicit_h),
        chirality,
        isotope,
        atom_map,
    })
}
