use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;

use super::{longest_match, KnowledgeEntry, Lexicon, Source};
use crate::error::{Error, Result};
use crate::text::{detokenize, is_placeholder, is_punctuation, tokenize};

const SHIPPED_PHRASES: &str = include_str!("../../data/key_phrases.txt");

/// Value tokens kept per snippet entry.
pub const SNIPPET_VALUE_LIMIT: usize = 20;

/// Relation → ordered search key phrases.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyPhraseTable {
    rows: BTreeMap<String, Vec<String>>,
}

impl Default for KeyPhraseTable {
    /// The shipped table covering all nine ATOMIC relations.
    fn default() -> Self {
        Self::parse(SHIPPED_PHRASES, Path::new("<shipped>")).expect("shipped key phrases parse")
    }
}

impl KeyPhraseTable {
    /// Parses `relation: phrase1, phrase2, ...` lines. A relation written as
    /// `{o, x}React` expands to `oReact` and `xReact`.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (rel, phrases) = line
                .split_once(':')
                .ok_or_else(|| Error::malformed(path, i + 1, "expected `relation: phrase, ...`"))?;
            let phrases: Vec<String> = phrases
                .split(',')
                .map(|p| p.trim().to_string())
                .filter(|p| !p.is_empty())
                .collect();
            if phrases.is_empty() {
                return Err(Error::malformed(path, i + 1, "no key phrases"));
            }
            for name in expand_relation(rel.trim()) {
                rows.insert(name, phrases.clone());
            }
        }
        Ok(KeyPhraseTable { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn phrases(&self, relation: &str) -> Option<&[String]> {
        self.rows.get(relation).map(Vec::as_slice)
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    /// Fails on the first relation without phrases.
    pub fn check_covers<S: AsRef<str>>(&self, relations: &[S]) -> Result<()> {
        for r in relations {
            if self.phrases(r.as_ref()).is_none() {
                return Err(Error::MissingRelation(r.as_ref().to_string()));
            }
        }
        Ok(())
    }
}

fn expand_relation(rel: &str) -> Vec<String> {
    if let (Some(open), Some(close)) = (rel.find('{'), rel.find('}')) {
        if open < close {
            let prefix = &rel[..open];
            let suffix = &rel[close + 1..];
            return rel[open + 1..close]
                .split(',')
                .map(|alt| format!("{prefix}{}{suffix}", alt.trim()))
                .collect();
        }
    }
    vec![rel.to_string()]
}

/// One query per key phrase of `relation`: the event's content words
/// (placeholders, blanks, stop words and punctuation removed), a space, and
/// the phrase.
pub fn build_queries<S: AsRef<str>>(
    event: &[S],
    relation: &str,
    table: &KeyPhraseTable,
    lexicon: &Lexicon,
) -> Result<Vec<String>> {
    let phrases = table
        .phrases(relation)
        .ok_or_else(|| Error::MissingRelation(relation.to_string()))?;
    let content = lexicon.content_tokens(event);
    if content.is_empty() {
        return Err(Error::EmptyInput(format!(
            "event `{}` has no content words",
            detokenize(event)
        )));
    }
    let head = content.join(" ");
    Ok(phrases.iter().map(|p| format!("{head} {p}")).collect())
}

/// Keeps nouns, verbs and adjectives by the lexicon, plus tokens the lexicon
/// does not know. Order and duplicates are preserved.
pub fn filter_content_words<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| match lexicon.pos(t) {
            Some(class) => class.is_content(),
            None => !is_punctuation(t) && !is_placeholder(t),
        })
        .map(str::to_string)
        .collect()
}

/// An offline search result for one (event, query).
#[derive(Clone, Debug, PartialEq)]
pub struct Snippet {
    pub event: String,
    pub query: String,
    pub rank: u32,
    pub text: Vec<String>,
}

#[derive(Deserialize)]
struct SnippetLine {
    event: String,
    query: String,
    rank: u32,
    text: String,
}

/// Snippets grouped by event string.
#[derive(Clone, Debug, Default)]
pub struct SnippetStore {
    by_event: HashMap<String, Vec<Snippet>>,
    count: usize,
}

impl SnippetStore {
    pub fn new(snippets: Vec<Snippet>) -> Result<Self> {
        let mut store = SnippetStore::default();
        for s in snippets {
            store.push(s, None)?;
        }
        Ok(store)
    }

    fn push(&mut self, s: Snippet, line: Option<(&Path, usize)>) -> Result<()> {
        let group = self.by_event.entry(s.event.clone()).or_default();
        if s.rank == 0 || group.iter().any(|o| o.query == s.query && o.rank == s.rank) {
            let reason = format!(
                "rank {} invalid or repeated for query {:?}",
                s.rank, s.query
            );
            return Err(match line {
                Some((p, l)) => Error::malformed(p, l, reason),
                None => Error::malformed("<snippets>", 0, reason),
            });
        }
        group.push(s);
        self.count += 1;
        Ok(())
    }

    /// Reads JSONL with fields `event`, `query`, `rank` (≥ 1), `text`.
    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut store = SnippetStore::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: SnippetLine = serde_json::from_str(&line)
                .map_err(|e| Error::malformed(path, i + 1, e.to_string()))?;
            let snip = Snippet {
                event: raw.event,
                query: raw.query,
                rank: raw.rank,
                text: tokenize(&raw.text),
            };
            store.push(snip, Some((path, i + 1)))?;
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Snippets of `event` issued for one of `queries`, lowest rank first
    /// (ties by query order), at most `limit`.
    pub fn for_event(&self, event: &str, queries: &[String], limit: usize) -> Vec<&Snippet> {
        let Some(group) = self.by_event.get(event) else {
            return Vec::new();
        };
        let order: HashMap<&str, usize> = queries
            .iter()
            .enumerate()
            .map(|(i, q)| (q.as_str(), i))
            .collect();
        let mut hits: Vec<(&Snippet, usize)> = group
            .iter()
            .filter_map(|s| order.get(s.query.as_str()).map(|&qi| (s, qi)))
            .collect();
        hits.sort_by_key(|(s, qi)| (s.rank, *qi));
        hits.into_iter().take(limit).map(|(s, _)| s).collect()
    }

    /// Largest number of snippets stored for any one event.
    pub fn max_per_event(&self) -> usize {
        self.by_event.values().map(Vec::len).max().unwrap_or(0)
    }
}

/// Memory entry for a snippet: key = query tokens, value = the first
/// [`SNIPPET_VALUE_LIMIT`] content words of the text, score = longest event
/// n-gram found in the text. `None` when no content words survive.
pub fn snippet_entry<S: AsRef<str>>(
    snippet: &Snippet,
    event: &[S],
    max_n: usize,
    lexicon: &Lexicon,
) -> Option<KnowledgeEntry> {
    let mut value = filter_content_words(&snippet.text, lexicon);
    value.truncate(SNIPPET_VALUE_LIMIT);
    let key = tokenize(&snippet.query);
    if value.is_empty() || key.is_empty() {
        return None;
    }
    let bag: HashSet<&str> = snippet.text.iter().map(String::as_str).collect();
    let score = longest_match(event, &bag, max_n, lexicon) as f64;
    Some(KnowledgeEntry {
        key,
        value,
        source: Source::Web,
        score,
    })
}
