use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{KnowledgeEntry, Lexicon};
use crate::text::tokenize;

/// One example: its relation, gold targets and retrieved entries.
#[derive(Clone, Debug)]
pub struct CoverageItem {
    pub relation: String,
    pub gold: Vec<String>,
    pub entries: Vec<KnowledgeEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationCoverage {
    pub examples: usize,
    pub hits: usize,
    /// Percentage in [0, 100].
    pub hit_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub per_relation: BTreeMap<String, RelationCoverage>,
    pub mean_entries: f64,
    pub examples: usize,
}

/// True when a content token of any gold target occurs among the entry values.
pub fn is_hit(item: &CoverageItem, lexicon: &Lexicon) -> bool {
    let values: HashSet<&str> = item
        .entries
        .iter()
        .flat_map(|e| e.value.iter().map(String::as_str))
        .collect();
    item.gold.iter().any(|g| {
        tokenize(g)
            .iter()
            .any(|t| lexicon.is_content_token(t) && values.contains(t.as_str()))
    })
}

pub fn coverage(items: &[CoverageItem], lexicon: &Lexicon) -> CoverageReport {
    let mut report = CoverageReport {
        examples: items.len(),
        ..Default::default()
    };
    let mut total_entries = 0usize;
    for item in items {
        total_entries += item.entries.len();
        let rc = report
            .per_relation
            .entry(item.relation.clone())
            .or_default();
        rc.examples += 1;
        if is_hit(item, lexicon) {
            rc.hits += 1;
        }
    }
    for rc in report.per_relation.values_mut() {
        rc.hit_rate = 100.0 * rc.hits as f64 / rc.examples as f64;
    }
    if !items.is_empty() {
        report.mean_entries = total_entries as f64 / items.len() as f64;
    }
    report
}
