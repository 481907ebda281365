//! Clause segmentation, clause shuffling and duplicate-clause insertion.
//!
//! Content is split into clauses after each top-level delimiter token
//! (`。，；,;.`); formulas are single segments so their inner punctuation never
//! splits. The last clause containing an interrogative marker is the ask
//! clause and stays in place; every other clause is conditional.

use rand::seq::SliceRandom;
use rand::Rng;

use super::text::is_interrogative;
use crate::corpus::Segment;

pub fn split_clauses(tokens: &[Segment]) -> Vec<Vec<Segment>> {
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for seg in tokens {
        current.push(seg.clone());
        if seg.is_clause_delimiter() {
            clauses.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    clauses
}

pub fn ask_clause(clauses: &[Vec<Segment>]) -> Option<usize> {
    clauses.iter().rposition(|c| {
        c.iter()
            .any(|s| matches!(s, Segment::Text(t) if is_interrogative(t)))
    })
}

fn conditional_indices(clauses: &[Vec<Segment>]) -> Vec<usize> {
    let ask = ask_clause(clauses);
    (0..clauses.len()).filter(|&i| Some(i) != ask).collect()
}

/// Reorder conditional clauses by `order` (a permutation of the conditional
/// clause slots); the ask clause keeps its position.
pub fn structure_shuffle(tokens: &[Segment], order: &[usize]) -> Vec<Segment> {
    let clauses = split_clauses(tokens);
    let slots = conditional_indices(&clauses);
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if slots.len() < 2 || sorted != (0..slots.len()).collect::<Vec<_>>() {
        return tokens.to_vec();
    }
    let mut out = clauses.clone();
    for (slot, &source) in slots.iter().zip(order) {
        out[*slot] = clauses[slots[source]].clone();
    }
    out.concat()
}

/// Duplicate the conditional clause at clause index `clause` and insert the
/// copy before clause index `position`.
pub fn structure_insert(tokens: &[Segment], clause: usize, position: usize) -> Vec<Segment> {
    let clauses = split_clauses(tokens);
    let ask = ask_clause(&clauses);
    let max_position = ask.unwrap_or(clauses.len());
    if clauses.len() < 2 || Some(clause) == ask || clause >= clauses.len() || position > max_position {
        return tokens.to_vec();
    }
    let mut out = clauses.clone();
    out.insert(position, clauses[clause].clone());
    out.concat()
}

pub(crate) fn random_shuffle<R: Rng + ?Sized>(tokens: &mut Vec<Segment>, rng: &mut R) -> Option<String> {
    let clauses = split_clauses(tokens);
    let slots = conditional_indices(&clauses);
    if slots.len() < 2 {
        return None;
    }
    let mut order: Vec<usize> = (0..slots.len()).collect();
    order.shuffle(rng);
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        order.rotate_left(1);
    }
    *tokens = structure_shuffle(tokens, &order);
    Some(format!("clause order {order:?}"))
}

pub(crate) fn random_insert<R: Rng + ?Sized>(tokens: &mut Vec<Segment>, rng: &mut R) -> Option<String> {
    let clauses = split_clauses(tokens);
    let slots = conditional_indices(&clauses);
    if clauses.len() < 2 || slots.is_empty() {
        return None;
    }
    let clause = *slots.choose(rng)?;
    let max_position = ask_clause(&clauses).unwrap_or(clauses.len());
    let position = rng.gen_range(0..=max_position);
    *tokens = structure_insert(tokens, clause, position);
    Some(format!("clause {clause} copied to {position}"))
}
