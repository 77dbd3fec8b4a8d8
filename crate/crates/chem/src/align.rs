//! Product/reactant alignment: root-aligned reactant rewriting and the
//! token-level alignment map used as cross-attention guidance.

use crate::parse::parse;
use crate::token::{tokenize, Token, TokenKind};
use crate::write::write;
use crate::Result;

/// Outcome of root alignment. `aligned` is false when product and reactants
/// share no atom-map number, in which case `smiles` is the input unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootAligned {
    pub smiles: String,
    pub aligned: bool,
}

/// Rewrite the reactants so that the first reactant atom sharing an atom-map
/// number with the product (scanning product map numbers in token order)
/// becomes the root of its component's SMILES. Components other than the
/// matched one keep their original text and order.
pub fn root_align(product: &str, reactants: &str) -> Result<RootAligned> {
    let p_tokens = tokenize(product)?;
    parse(&p_tokens)?;
    let r_tokens = tokenize(reactants)?;
    parse(&r_tokens)?;

    let product_maps: Vec<u32> = p_tokens.iter().filter_map(|t| t.atom_map).collect();

    // Reactant components as token ranges split on top-level dots.
    let components = split_components(&r_tokens);

    for &p_num in &product_maps {
        for (comp_idx, range) in components.iter().enumerate() {
            let comp_tokens = &r_tokens[range.clone()];
            for (local_pos, tok) in comp_tokens.iter().enumerate() {
                if tok.atom_map == Some(p_num) {
                    // Atom index within the component = atom tokens before it.
                    let local_atom = comp_tokens[..local_pos].iter().filter(|t| t.is_atom()).count();
                    let comp_text: String = comp_tokens.iter().map(|t| t.text.as_str()).collect();
                    let comp_graph = parse(&tokenize(&comp_text)?)?;
                    let rewritten = write(&comp_graph, local_atom)?;
                    let mut parts: Vec<String> = components
                        .iter()
                        .map(|r| r_tokens[r.clone()].iter().map(|t| t.text.as_str()).collect())
                        .collect();
                    parts[comp_idx] = rewritten;
                    return Ok(RootAligned { smiles: parts.join("."), aligned: true });
                }
            }
        }
    }
    Ok(RootAligned { smiles: reactants.to_string(), aligned: false })
}

fn split_components(tokens: &[Token]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.kind == TokenKind::Dot {
            out.push(start..i);
            start = i + 1;
        }
    }
    out.push(start..tokens.len());
    out
}

/// Binary reactant-token x product-token alignment matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentMap {
    pub rows: usize,
    pub cols: usize,
    bits: Vec<bool>,
}

impl AlignmentMap {
    pub fn new(rows: usize, cols: usize) -> AlignmentMap {
        AlignmentMap { rows, cols, bits: vec![false; rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.cols + j] = true;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty_map(&self) -> bool {
        self.count_ones() == 0
    }

    pub fn row_has_any(&self, i: usize) -> bool {
        self.bits[i * self.cols..(i + 1) * self.cols].iter().any(|&b| b)
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Token correspondence between reactants and product.
///
/// Phase 1: each unvisited atom-mapped reactant token seeds at the product
/// token carrying the same map number, then both cursors walk forward while
/// the tokens have equal text or share a map number. Phase 2: from every
/// pair found in phase 1, the cursors walk backward while the tokens have
/// equal text and the reactant token is not an atom. Pairs accumulate as a
/// union.
pub fn build_sam(product: &str, reactants: &str) -> Result<AlignmentMap> {
    let p = tokenize(product)?;
    let r = tokenize(reactants)?;
    let mut sam = AlignmentMap::new(r.len(), p.len());
    let mut visited = vec![false; r.len()];
    let mut forward_pairs: Vec<(usize, usize)> = Vec::new();

    for i in 0..r.len() {
        if visited[i] || r[i].atom_map.is_none() {
            continue;
        }
        let Some(j) = p.iter().position(|t| t.atom_map == r[i].atom_map) else {
            continue;
        };
        let (mut ii, mut jj) = (i, j);
        while ii < r.len() && jj < p.len() && extend_forward(&r[ii], &p[jj]) {
            sam.set(ii, jj);
            forward_pairs.push((ii, jj));
            visited[ii] = true;
            ii += 1;
            jj += 1;
        }
    }

    for &(i0, j0) in &forward_pairs {
        let (mut ii, mut jj) = (i0 as isize - 1, j0 as isize - 1);
        while ii >= 0 && jj >= 0 && extend_backward(&r[ii as usize], &p[jj as usize]) {
            sam.set(ii as usize, jj as usize);
            ii -= 1;
            jj -= 1;
        }
    }
    Ok(sam)
}

fn extend_forward(r: &Token, p: &Token) -> bool {
    r.text == p.text || (r.atom_map.is_some() && r.atom_map == p.atom_map)
}

fn extend_backward(r: &Token, p: &Token) -> bool {
    r.text == p.text && !r.is_atom()
}
