//! Commonsense knowledge for the memory: n-gram retrieval over a triple
//! store, search-query construction and content filtering for offline web
//! snippets, top-k entry selection, and coverage measurement.

mod coverage;
mod lexicon;
mod memory;
mod triples;
mod web;

pub use coverage::{coverage, is_hit, CoverageItem, CoverageReport, RelationCoverage};
pub use lexicon::{Lexicon, PosClass};
pub use memory::{select_memory_entries, KnowledgeEntry, Source, DEFAULT_MEMORY_LIMIT};
pub use triples::{longest_match, retrieve_triples, KnowledgeTriple, TripleStore};
pub use web::{
    build_queries, filter_content_words, snippet_entry, KeyPhraseTable, Snippet, SnippetStore,
    SNIPPET_VALUE_LIMIT,
};

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Which stores feed the memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnowledgeSources {
    None,
    ConceptNet,
    Web,
    Both,
}

impl KnowledgeSources {
    pub fn uses_triples(self) -> bool {
        matches!(self, KnowledgeSources::ConceptNet | KnowledgeSources::Both)
    }

    pub fn uses_web(self) -> bool {
        matches!(self, KnowledgeSources::Web | KnowledgeSources::Both)
    }
}

impl FromStr for KnowledgeSources {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(KnowledgeSources::None),
            "conceptnet" => Ok(KnowledgeSources::ConceptNet),
            "web" | "google" => Ok(KnowledgeSources::Web),
            "both" => Ok(KnowledgeSources::Both),
            other => Err(format!("unknown knowledge source `{other}`")),
        }
    }
}

impl std::fmt::Display for KnowledgeSources {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KnowledgeSources::None => "none",
            KnowledgeSources::ConceptNet => "conceptnet",
            KnowledgeSources::Web => "web",
            KnowledgeSources::Both => "both",
        })
    }
}

/// Everything needed to assemble the memory for one (event, relation).
#[derive(Clone, Debug)]
pub struct KnowledgeBase {
    pub triples: TripleStore,
    pub snippets: SnippetStore,
    pub phrases: KeyPhraseTable,
    pub lexicon: Lexicon,
    pub sources: KnowledgeSources,
    pub max_ngram: usize,
    pub snippets_per_event: usize,
    pub limit: usize,
}

impl KnowledgeBase {
    /// A base that always yields an empty memory.
    pub fn empty() -> Self {
        KnowledgeBase {
            triples: TripleStore::default(),
            snippets: SnippetStore::default(),
            phrases: KeyPhraseTable::default(),
            lexicon: Lexicon::default(),
            sources: KnowledgeSources::None,
            max_ngram: 3,
            snippets_per_event: 10,
            limit: DEFAULT_MEMORY_LIMIT,
        }
    }

    /// Candidate entries from the enabled sources, before selection.
    pub fn candidates(
        &self,
        event: &str,
        event_tokens: &[String],
        relation: &str,
    ) -> Result<Vec<KnowledgeEntry>> {
        self.candidates_from(self.sources, event, event_tokens, relation)
    }

    /// Like [`KnowledgeBase::candidates`] with `sources` in place of the
    /// configured ones.
    pub fn candidates_from(
        &self,
        sources: KnowledgeSources,
        event: &str,
        event_tokens: &[String],
        relation: &str,
    ) -> Result<Vec<KnowledgeEntry>> {
        let mut out = Vec::new();
        if sources.uses_triples() {
            for (idx, score) in
                retrieve_triples(event_tokens, &self.triples, self.max_ngram, &self.lexicon)
            {
                out.push(self.triples.get(idx).to_entry(score as f64));
            }
        }
        if sources.uses_web() && self.snippets_per_event > 0 {
            let queries = match build_queries(event_tokens, relation, &self.phrases, &self.lexicon)
            {
                Ok(q) => q,
                Err(crate::Error::EmptyInput(_)) => Vec::new(),
                Err(e) => return Err(e),
            };
            for snip in self
                .snippets
                .for_event(event, &queries, self.snippets_per_event)
            {
                if let Some(entry) =
                    snippet_entry(snip, event_tokens, self.max_ngram, &self.lexicon)
                {
                    out.push(entry);
                }
            }
        }
        Ok(out)
    }

    /// The selected memory for one (event, relation), at most `limit` entries.
    pub fn entries(
        &self,
        event: &str,
        event_tokens: &[String],
        relation: &str,
    ) -> Result<Vec<KnowledgeEntry>> {
        self.entries_from(self.sources, event, event_tokens, relation)
    }

    pub fn entries_from(
        &self,
        sources: KnowledgeSources,
        event: &str,
        event_tokens: &[String],
        relation: &str,
    ) -> Result<Vec<KnowledgeEntry>> {
        Ok(select_memory_entries(
            self.candidates_from(sources, event, event_tokens, relation)?,
            self.limit,
        ))
    }
}
