//! SMILES tokenizer.
//!
//! Splits a SMILES string into a lossless token sequence: concatenating the
//! token texts in order reproduces the input exactly. Two-letter elements
//! (`Cl`, `Br`), bracket atoms `[...]` and multi-digit ring closures `%nn`
//! each form a single token.

use crate::{ChemError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Organic-subset atom written bare, e.g. `C`, `Cl`, `c`.
    Atom,
    /// Bracket atom, e.g. `[CH3:5]`, `[nH]`, `[O-]`.
    BracketAtom,
    /// Explicit bond: `-`, `=`, `#`, `:`, `/`, `\`, `~`.
    Bond,
    /// Ring closure digit or `%nn`.
    RingBond,
    /// `(` or `)`.
    Branch,
    /// Component separator `.`.
    Dot,
    /// Reserved for non-SMILES vocabulary entries (specials, class tokens).
    Special,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// Atom-map number (`:n` inside brackets); only on atom kinds.
    pub atom_map: Option<u32>,
}

impl Token {
    pub fn is_atom(&self) -> bool {
        matches!(self.kind, TokenKind::Atom | TokenKind::BracketAtom)
    }
}

const AROMATIC_BARE: [char; 6] = ['b', 'c', 'n', 'o', 'p', 's'];

pub fn tokenize(smiles: &str) -> Result<Vec<Token>> {
    if smiles.is_empty() {
        return Err(ChemError::Parse { offset: 0, message: "empty SMILES".into() });
    }
    let bytes = smiles.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            '[' => {
                let close = smiles[i..].find(']').map(|p| i + p).ok_or(ChemError::Parse {
                    offset: i,
                    message: "unbalanced '[': no closing ']'".into(),
                })?;
                let text = &smiles[i..=close];
                if text.len() < 3 {
                    return Err(ChemError::Parse { offset: i, message: "empty bracket atom".into() });
                }
                let atom_map = bracket_atom_map(text, i)?;
                tokens.push(Token { text: text.to_string(), kind: TokenKind::BracketAtom, atom_map });
                i = close + 1;
            }
            ']' => {
                return Err(ChemError::Parse { offset: i, message: "unbalanced ']'".into() });
            }
            'C' if bytes.get(i + 1) == Some(&b'l') => {
                tokens.push(bare_atom("Cl"));
                i += 2;
            }
            'B' if bytes.get(i + 1) == Some(&b'r') => {
                tokens.push(bare_atom("Br"));
                i += 2;
            }
            'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' | '*' => {
                tokens.push(bare_atom(&smiles[i..i + 1]));
                i += 1;
            }
            _ if AROMATIC_BARE.contains(&c) => {
                tokens.push(bare_atom(&smiles[i..i + 1]));
                i += 1;
            }
            '0'..='9' => {
                tokens.push(Token {
                    text: smiles[i..i + 1].to_string(),
                    kind: TokenKind::RingBond,
                    atom_map: None,
                });
                i += 1;
            }
            '%' => {
                if i + 2 >= bytes.len()
                    || !bytes[i + 1].is_ascii_digit()
                    || !bytes[i + 2].is_ascii_digit()
                {
                    return Err(ChemError::Parse {
                        offset: i,
                        message: "'%' must be followed by two digits".into(),
                    });
                }
                tokens.push(Token {
                    text: smiles[i..i + 3].to_string(),
                    kind: TokenKind::RingBond,
                    atom_map: None,
                });
                i += 3;
            }
            '(' | ')' => {
                tokens.push(Token {
                    text: smiles[i..i + 1].to_string(),
                    kind: TokenKind::Branch,
                    atom_map: None,
                });
                i += 1;
            }
            '.' => {
                tokens.push(Token {
                    text: ".".to_string(),
                    kind: TokenKind::Dot,
                    atom_map: None,
                });
                i += 1;
            }
            '-' | '=' | '#' | ':' | '/' | '\\' | '~' => {
                tokens.push(Token {
                    text: smiles[i..i + 1].to_string(),
                    kind: TokenKind::Bond,
                    atom_map: None,
                });
                i += 1;
            }
            other => {
                return Err(ChemError::Parse {
                    offset: i,
                    message: format!("illegal character {:?}", other),
                });
            }
        }
    }
    Ok(tokens)
}

fn bare_atom(text: &str) -> Token {
    Token { text: text.to_string(), kind: TokenKind::Atom, atom_map: None }
}

/// Extract the `:n` atom map from a bracket-atom token text.
fn bracket_atom_map(text: &str, offset: usize) -> Result<Option<u32>> {
    let inner = &text[1..text.len() - 1];
    match inner.rfind(':') {
        Some(pos) => {
            let digits = &inner[pos + 1..];
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(ChemError::Parse {
                    offset,
                    message: format!("malformed atom map in {:?}", text),
                });
            }
            let n: u32 = digits.parse().map_err(|_| ChemError::Parse {
                offset,
                message: format!("atom map out of range in {:?}", text),
            })?;
            Ok(Some(n))
        }
        None => Ok(None),
    }
}

/// Map each token position to its atom index: the k-th atom token binds to
/// atom k in parse order. Non-atom tokens get `None`.
pub fn atom_binding(tokens: &[Token]) -> Vec<Option<usize>> {
    let mut next = 0;
    tokens
        .iter()
        .map(|t| {
            if t.is_atom() {
                let idx = next;
                next += 1;
                Some(idx)
            } else {
                None
            }
        })
        .collect()
}
