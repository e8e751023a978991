use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{KnowledgeEntry, Lexicon, Source};
use crate::error::{Error, Result};
use crate::text::{is_placeholder, tokenize};

/// A `(subject, relation, object)` fact with a confidence weight.
#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeTriple {
    pub subject: Vec<String>,
    pub relation: String,
    pub object: Vec<String>,
    pub weight: f64,
}

impl KnowledgeTriple {
    pub fn new(subject: &str, relation: &str, object: &str, weight: f64) -> Option<Self> {
        let subject = tokenize(subject);
        let object = tokenize(object);
        if subject.is_empty() || object.is_empty() || weight.is_nan() || weight < 0.0 {
            return None;
        }
        Some(KnowledgeTriple {
            subject,
            relation: relation.to_string(),
            object,
            weight,
        })
    }

    /// Key = subject followed by the relation name split into words
    /// (`AtLocation` → `at location`); value = object.
    pub fn to_entry(&self, score: f64) -> KnowledgeEntry {
        let mut key = self.subject.clone();
        key.extend(relation_words(&self.relation));
        KnowledgeEntry {
            key,
            value: self.object.clone(),
            source: Source::ConceptNet,
            score,
        }
    }

    fn tokens(&self) -> impl Iterator<Item = &str> {
        self.subject.iter().chain(&self.object).map(String::as_str)
    }
}

/// Splits `/r/AtLocation` or `AtLocation` into lowercase words.
pub(crate) fn relation_words(relation: &str) -> Vec<String> {
    let name = relation.rsplit('/').next().unwrap_or(relation);
    let mut words = Vec::new();
    let mut cur = String::new();
    for c in name.chars() {
        if c == '_' || c == ' ' {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
        } else if c.is_uppercase() && !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
            cur.extend(c.to_lowercase());
        } else {
            cur.extend(c.to_lowercase());
        }
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words
}

/// Triples with an inverted index from token to triple.
#[derive(Clone, Debug, Default)]
pub struct TripleStore {
    triples: Vec<KnowledgeTriple>,
    index: HashMap<String, Vec<usize>>,
}

impl TripleStore {
    pub fn new(triples: Vec<KnowledgeTriple>) -> Self {
        let mut store = TripleStore::default();
        for t in triples {
            store.push(t);
        }
        store
    }

    pub fn push(&mut self, triple: KnowledgeTriple) {
        let id = self.triples.len();
        let unique: HashSet<&str> = triple.tokens().collect();
        for tok in unique {
            self.index.entry(tok.to_string()).or_default().push(id);
        }
        self.triples.push(triple);
    }

    /// Reads `subject<TAB>relation<TAB>object<TAB>weight` lines.
    pub fn load_tsv(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut store = TripleStore::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            if f.len() != 4 {
                return Err(Error::malformed(
                    path,
                    i + 1,
                    format!("expected 4 fields, found {}", f.len()),
                ));
            }
            let weight: f64 = f[3]
                .trim()
                .parse()
                .map_err(|_| Error::malformed(path, i + 1, format!("bad weight {:?}", f[3])))?;
            let triple =
                KnowledgeTriple::new(f[0], f[1].trim(), f[2], weight).ok_or_else(|| {
                    Error::malformed(path, i + 1, "empty subject/object or negative weight")
                })?;
            store.push(triple);
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn get(&self, index: usize) -> &KnowledgeTriple {
        &self.triples[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &KnowledgeTriple> {
        self.triples.iter()
    }

    fn candidates(&self, tokens: &[&str]) -> BTreeSet<usize> {
        tokens
            .iter()
            .filter_map(|t| self.index.get(*t))
            .flatten()
            .copied()
            .collect()
    }
}

/// Length of the longest event n-gram (n ≤ `max_n`) whose tokens all occur
/// in `bag`; 0 when none does. N-grams touching a placeholder and n-grams
/// made only of stop words or punctuation never match.
pub fn longest_match<S: AsRef<str>>(
    event: &[S],
    bag: &HashSet<&str>,
    max_n: usize,
    lexicon: &Lexicon,
) -> usize {
    for n in (1..=max_n.max(1)).rev() {
        for w in event.windows(n) {
            if w.iter().any(|t| is_placeholder(t.as_ref())) {
                continue;
            }
            if !w.iter().any(|t| lexicon.is_content_token(t.as_ref())) {
                continue;
            }
            if w.iter().all(|t| bag.contains(t.as_ref())) {
                return n;
            }
        }
    }
    0
}

/// Triples sharing at least one event n-gram with their subject/object,
/// as `(index, score)` where score is the longest shared n-gram length.
/// Sorted by score, then weight (both descending), then store order.
pub fn retrieve_triples<S: AsRef<str>>(
    event: &[S],
    store: &TripleStore,
    max_n: usize,
    lexicon: &Lexicon,
) -> Vec<(usize, usize)> {
    let content: Vec<&str> = event
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| lexicon.is_content_token(t))
        .collect();
    let mut hits: Vec<(usize, usize)> = store
        .candidates(&content)
        .into_iter()
        .filter_map(|id| {
            let bag: HashSet<&str> = store.triples[id].tokens().collect();
            let score = longest_match(event, &bag, max_n, lexicon);
            (score > 0).then_some((id, score))
        })
        .collect();
    hits.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then(
                store.triples[b.0]
                    .weight
                    .total_cmp(&store.triples[a.0].weight),
            )
            .then(a.0.cmp(&b.0))
    });
    hits
}
