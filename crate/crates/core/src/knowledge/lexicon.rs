use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::{is_placeholder, is_punctuation};

const SHIPPED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const SHIPPED_POS: &str = include_str!("../../data/pos_lexicon.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PosClass {
    Noun,
    Verb,
    Adjective,
    Other,
}

impl PosClass {
    fn parse(tag: &str) -> PosClass {
        match tag.trim().to_ascii_lowercase().as_str() {
            "noun" | "n" | "nn" | "propn" => PosClass::Noun,
            "verb" | "v" | "vb" | "aux" => PosClass::Verb,
            "adj" | "adjective" | "a" | "jj" => PosClass::Adjective,
            _ => PosClass::Other,
        }
    }

    pub fn is_content(self) -> bool {
        !matches!(self, PosClass::Other)
    }
}

/// Stop words plus a token → part-of-speech table.
#[derive(Clone, Debug)]
pub struct Lexicon {
    stopwords: HashSet<String>,
    pos: HashMap<String, PosClass>,
}

impl Default for Lexicon {
    /// The shipped stop-word list and POS lexicon.
    fn default() -> Self {
        Lexicon {
            stopwords: parse_stopwords(SHIPPED_STOPWORDS),
            pos: parse_pos(SHIPPED_POS, Path::new("<shipped>")).expect("shipped lexicon parses"),
        }
    }
}

impl Lexicon {
    pub fn new(
        stopwords: impl IntoIterator<Item = String>,
        pos: impl IntoIterator<Item = (String, PosClass)>,
    ) -> Self {
        Lexicon {
            stopwords: stopwords.into_iter().collect(),
            pos: pos.into_iter().collect(),
        }
    }

    /// Replaces the POS table with the `token<TAB>pos-class` file at `path`.
    pub fn with_pos_file(mut self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.pos = parse_pos(&text, path)?;
        Ok(self)
    }

    pub fn with_stopword_file(mut self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.stopwords = parse_stopwords(&text);
        Ok(self)
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn pos(&self, token: &str) -> Option<PosClass> {
        self.pos.get(token).copied()
    }

    /// Not a stop word, placeholder, blank or punctuation.
    pub fn is_content_token(&self, token: &str) -> bool {
        !is_placeholder(token) && !is_punctuation(token) && !self.is_stopword(token)
    }

    pub fn content_tokens<'a, S: AsRef<str>>(&self, tokens: &'a [S]) -> Vec<&'a str> {
        tokens
            .iter()
            .map(AsRef::as_ref)
            .filter(|t| self.is_content_token(t))
            .collect()
    }
}

fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

fn parse_pos(text: &str, path: &Path) -> Result<HashMap<String, PosClass>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (tok, tag) = line
            .split_once('\t')
            .ok_or_else(|| Error::malformed(path, i + 1, "expected token<TAB>pos-class"))?;
        out.insert(tok.trim().to_string(), PosClass::parse(tag));
    }
    Ok(out)
}
