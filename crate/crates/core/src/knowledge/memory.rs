use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// Default cap on memory entries per example.
pub const DEFAULT_MEMORY_LIMIT: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    ConceptNet,
    Web,
}

/// A key/value token pair stored in the memory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub key: Vec<String>,
    pub value: Vec<String>,
    pub source: Source,
    pub score: f64,
}

fn rank(a: &KnowledgeEntry, b: &KnowledgeEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.source.cmp(&b.source))
        .then_with(|| a.key.cmp(&b.key))
}

/// The top `limit` candidates by score (descending), then source
/// (ConceptNet first), then key. The sort is stable, so fully tied entries
/// keep their input order.
pub fn select_memory_entries(
    mut candidates: Vec<KnowledgeEntry>,
    limit: usize,
) -> Vec<KnowledgeEntry> {
    candidates.retain(|c| !c.key.is_empty() && !c.value.is_empty() && c.score.is_finite());
    candidates.sort_by(rank);
    candidates.truncate(limit.max(1));
    candidates
}
