//! Random swap and random deletion over text tokens. Formula segments never
//! move and are never removed.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::Segment;

/// Tokens that mark the question's ask clause.
pub const INTERROGATIVE_MARKERS: [&str; 4] = ["find", "求", "?", "？"];

pub fn is_interrogative(token: &str) -> bool {
    INTERROGATIVE_MARKERS
        .iter()
        .any(|m| m.eq_ignore_ascii_case(token))
}

fn is_punctuation(token: &str) -> bool {
    token.chars().all(|c| !c.is_alphanumeric())
}

/// Word tokens the random strategies may touch: text that is neither
/// punctuation nor an interrogative marker, so clause boundaries and the ask
/// clause survive text augmentation.
pub(crate) fn eligible_words(tokens: &[Segment]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, Segment::Text(t) if !is_punctuation(t) && !is_interrogative(t)))
        .map(|(i, _)| i)
        .collect()
}

fn text_count(tokens: &[Segment]) -> usize {
    tokens.iter().filter(|s| s.is_text()).count()
}

/// Swap the text tokens at `i` and `j`; a no-op unless both are distinct
/// text positions.
pub fn text_swap(tokens: &[Segment], i: usize, j: usize) -> Vec<Segment> {
    let mut out = tokens.to_vec();
    let ok = i != j
        && tokens.get(i).is_some_and(Segment::is_text)
        && tokens.get(j).is_some_and(Segment::is_text);
    if ok {
        out.swap(i, j);
    }
    out
}

/// Remove the text token at `i`; a no-op when `i` is not text or fewer than
/// two text tokens exist.
pub fn text_delete(tokens: &[Segment], i: usize) -> Vec<Segment> {
    let mut out = tokens.to_vec();
    if tokens.get(i).is_some_and(Segment::is_text) && text_count(tokens) >= 2 {
        out.remove(i);
    }
    out
}

pub(crate) fn random_swap<R: Rng + ?Sized>(tokens: &mut Vec<Segment>, rng: &mut R) -> Option<String> {
    let words = eligible_words(tokens);
    if words.len() < 2 {
        return None;
    }
    let picked: Vec<usize> = words.choose_multiple(rng, 2).copied().collect();
    let (i, j) = (picked[0].min(picked[1]), picked[0].max(picked[1]));
    *tokens = text_swap(tokens, i, j);
    Some(format!("tokens {i}<->{j}"))
}

pub(crate) fn random_delete<R: Rng + ?Sized>(tokens: &mut Vec<Segment>, rng: &mut R) -> Option<String> {
    let words = eligible_words(tokens);
    if words.len() < 2 {
        return None;
    }
    let i = *words.choose(rng)?;
    let removed = match &tokens[i] {
        Segment::Text(t) => t.clone(),
        Segment::Formula(_) => unreachable!("eligible words are text"),
    };
    *tokens = text_delete(tokens, i);
    Some(format!("token {i} {removed:?}"))
}
