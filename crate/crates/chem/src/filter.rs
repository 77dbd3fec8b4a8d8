//! Reaction dataset filters.
//!
//! Five cleaning rules applied in order: invalid/empty SMILES; product atoms
//! absent from the reactants (by atom map); reactant components sharing no
//! atom with the product (pruned, not dropped); duplicate atom-map numbers
//! on either side; products with fewer than five atoms.

use std::collections::HashSet;

use crate::parse_smiles;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionRecord {
    pub id: String,
    pub reactants: String,
    pub product: String,
    pub class_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterReason {
    InvalidSmiles(&'static str),
    ProductAtomMissing,
    NoReactantSharesProduct,
    DuplicateAtomMap(&'static str),
    ProductTooSmall { atoms: usize },
}

impl std::fmt::Display for FilterReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FilterReason::InvalidSmiles(side) => write!(f, "invalid SMILES ({side})"),
            FilterReason::ProductAtomMissing => write!(f, "product atom missing from reactants"),
            FilterReason::NoReactantSharesProduct => {
                write!(f, "no reactant shares an atom with the product")
            }
            FilterReason::DuplicateAtomMap(side) => write!(f, "duplicate atom map ({side})"),
            FilterReason::ProductTooSmall { atoms } => {
                write!(f, "product<5 atoms ({atoms})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterOutcome {
    /// Record kept; spectator reactant components may have been pruned.
    Keep { record: ReactionRecord, pruned_components: usize },
    Drop { reason: FilterReason },
}

pub fn dataset_filter(record: &ReactionRecord) -> FilterOutcome {
    // Rule 1: invalid or empty SMILES.
    if record.product.trim().is_empty() || record.reactants.trim().is_empty() {
        return FilterOutcome::Drop { reason: FilterReason::InvalidSmiles("empty") };
    }
    let product = match parse_smiles(&record.product) {
        Ok(g) => g,
        Err(_) => return FilterOutcome::Drop { reason: FilterReason::InvalidSmiles("product") },
    };
    if parse_smiles(&record.reactants).is_err() {
        return FilterOutcome::Drop { reason: FilterReason::InvalidSmiles("reactants") };
    }

    let product_maps: Vec<Option<u32>> = product.atoms.iter().map(|a| a.atom_map).collect();
    let reactant_components: Vec<String> =
        record.reactants.split('.').map(str::to_string).collect();
    let component_maps: Vec<Vec<Option<u32>>> = reactant_components
        .iter()
        .map(|c| {
            parse_smiles(c)
                .map(|g| g.atoms.iter().map(|a| a.atom_map).collect())
                .unwrap_or_default()
        })
        .collect();
    let reactant_map_set: HashSet<u32> =
        component_maps.iter().flatten().filter_map(|m| *m).collect();

    // Rule 2: every product atom must be present (mapped) in the reactants.
    for m in &product_maps {
        match m {
            Some(n) if reactant_map_set.contains(n) => {}
            _ => return FilterOutcome::Drop { reason: FilterReason::ProductAtomMissing },
        }
    }

    // Rule 3: prune reactant components with no atom in the product.
    let product_map_set: HashSet<u32> = product_maps.iter().filter_map(|m| *m).collect();
    let mut kept = Vec::new();
    let mut pruned = 0;
    for (comp, maps) in reactant_components.iter().zip(&component_maps) {
        if maps.iter().any(|m| m.is_some_and(|n| product_map_set.contains(&n))) {
            kept.push(comp.clone());
        } else {
            pruned += 1;
        }
    }
    if kept.is_empty() {
        return FilterOutcome::Drop { reason: FilterReason::NoReactantSharesProduct };
    }

    // Rule 4: duplicate atom-map numbers on either side.
    if has_duplicates(product_maps.iter().filter_map(|m| *m)) {
        return FilterOutcome::Drop { reason: FilterReason::DuplicateAtomMap("product") };
    }
    let kept_maps = component_maps
        .iter()
        .zip(&reactant_components)
        .filter(|(_, comp)| kept.contains(comp))
        .flat_map(|(maps, _)| maps.iter().filter_map(|m| *m));
    if has_duplicates(kept_maps) {
        return FilterOutcome::Drop { reason: FilterReason::DuplicateAtomMap("reactants") };
    }

    // Rule 5: tiny products.
    if product.atom_count() < 5 {
        return FilterOutcome::Drop {
            reason: FilterReason::ProductTooSmall { atoms: product.atom_count() },
        };
    }

    FilterOutcome::Keep {
        record: ReactionRecord {
            id: record.id.clone(),
            reactants: kept.join("."),
            product: record.product.clone(),
            class_id: record.class_id,
        },
        pruned_components: pruned,
    }
}

fn has_duplicates(maps: impl Iterator<Item = u32>) -> bool {
    let mut seen = HashSet::new();
    for m in maps {
        if !seen.insert(m) {
            return true;
        }
    }
    false
}
