//! Knowledge-hierarchy-aware ranking.
//!
//! `khd(a, b) = L - u + 1` where `u` is the deepest level at which the two
//! concept paths agree, and `L + 1` when they share no concept. An anchor's
//! own augmented view is rank 0 by construction.

use serde::{Deserialize, Serialize};

use crate::corpus::ConceptPath;
use crate::{Error, Result};

/// KH-distance between two concept paths of an `levels`-level hierarchy.
pub fn khd(a: &ConceptPath, b: &ConceptPath, levels: usize) -> Result<usize> {
    if a.len() != levels || b.len() != levels {
        return Err(Error::invalid(format!(
            "concept paths of length {} and {} in a {levels}-level hierarchy",
            a.len(),
            b.len()
        )));
    }
    Ok(khd_unchecked(a, b, levels))
}

pub(crate) fn khd_unchecked(a: &ConceptPath, b: &ConceptPath, levels: usize) -> usize {
    let shared = a.0.iter().zip(&b.0).take_while(|(x, y)| x == y).count();
    if shared == 0 {
        levels + 1
    } else {
        levels - shared + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankMember {
    /// The anchor's augmented view.
    Augmented,
    /// Index into the candidate list given to [`partition`].
    Candidate(usize),
}

/// Rank sets `Q^0 ..= Q^{L+1}` for one anchor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankPartition {
    pub anchor: String,
    pub sets: Vec<Vec<RankMember>>,
}

impl RankPartition {
    pub fn levels(&self) -> usize {
        self.sets.len() - 2
    }

    pub fn rank_of(&self, member: RankMember) -> Option<usize> {
        self.sets.iter().position(|s| s.contains(&member))
    }

    pub fn len(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Place every candidate into the rank set given by its KH-distance to the
/// anchor. Candidates carrying the anchor's id (stale copies of the anchor
/// itself) are dropped.
pub fn partition<'a, I>(
    anchor_id: &str,
    anchor_path: &ConceptPath,
    with_augmented: bool,
    candidates: I,
    levels: usize,
) -> Result<RankPartition>
where
    I: IntoIterator<Item = (&'a str, &'a ConceptPath)>,
{
    if anchor_path.len() != levels {
        return Err(Error::invalid(format!(
            "anchor {anchor_id:?} has a path of length {} in a {levels}-level hierarchy",
            anchor_path.len()
        )));
    }
    let mut sets = vec![Vec::new(); levels + 2];
    if with_augmented {
        sets[0].push(RankMember::Augmented);
    }
    for (i, (id, path)) in candidates.into_iter().enumerate() {
        if id == anchor_id {
            continue;
        }
        let rank = khd(anchor_path, path, levels)?;
        sets[rank].push(RankMember::Candidate(i));
    }
    Ok(RankPartition {
        anchor: anchor_id.to_string(),
        sets,
    })
}
