use std::collections::BTreeSet;

use super::vocab::{BLANK, PERSON_X, PERSON_Y};

/// Lowercases, splits on whitespace and separates punctuation.
///
/// `PersonX`/`PersonY` (any case) become the placeholder tokens, runs of
/// underscores become [`BLANK`], and an apostrophe followed by letters stays
/// attached to them as a clitic (`john's` → `john`, `'s`).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut i = 0;
        let mut word = String::new();
        let flush = |word: &mut String, out: &mut Vec<String>| {
            if !word.is_empty() {
                out.push(normalize_word(word));
                word.clear();
            }
        };
        while i < chars.len() {
            let c = chars[i];
            if c.is_alphanumeric() {
                word.push(c);
                i += 1;
            } else if c == '_' {
                flush(&mut word, &mut out);
                while i < chars.len() && chars[i] == '_' {
                    i += 1;
                }
                out.push(BLANK.to_string());
            } else if is_apostrophe(c) && chars.get(i + 1).is_some_and(|n| n.is_alphabetic()) {
                flush(&mut word, &mut out);
                let mut clitic = String::from('\'');
                i += 1;
                while i < chars.len() && chars[i].is_alphabetic() {
                    clitic.extend(chars[i].to_lowercase());
                    i += 1;
                }
                out.push(clitic);
            } else {
                flush(&mut word, &mut out);
                out.push(if is_apostrophe(c) {
                    "'".to_string()
                } else {
                    c.to_string()
                });
                i += 1;
            }
        }
        flush(&mut word, &mut out);
    }
    out
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

fn normalize_word(word: &str) -> String {
    let lower = word.to_lowercase();
    match lower.as_str() {
        "personx" => PERSON_X.to_string(),
        "persony" => PERSON_Y.to_string(),
        _ => lower,
    }
}

/// Joins tokens with single spaces. [`tokenize`] of the result returns the
/// same tokens.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn is_placeholder(token: &str) -> bool {
    matches!(token, PERSON_X | PERSON_Y | BLANK)
}

pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && !token.chars().any(char::is_alphanumeric)
}

/// All contiguous n-grams for n = 1..=max_n, skipping any window that
/// touches a placeholder or blank.
pub fn extract_ngrams<S: AsRef<str>>(tokens: &[S], max_n: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for n in 1..=max_n.max(1) {
        for window in tokens.windows(n) {
            if window.iter().any(|t| is_placeholder(t.as_ref())) {
                continue;
            }
            out.insert(detokenize(window));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn event_with_possessive() {
        assert_eq!(
            tokenize("PersonX makes John's coffee"),
            toks(&["PersonX", "makes", "john", "'s", "coffee"])
        );
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n").is_empty());
    }

    #[test]
    fn blank_slot() {
        assert_eq!(
            tokenize("PersonX drinks ___ everyday"),
            toks(&["PersonX", "drinks", "___", "everyday"])
        );
    }

    #[test]
    fn punctuation_and_case() {
        assert_eq!(
            tokenize("To be HELPFUL, personY!"),
            toks(&["to", "be", "helpful", ",", "PersonY", "!"])
        );
        assert_eq!(tokenize("well-known"), toks(&["well", "-", "known"]));
        assert_eq!(
            tokenize("rock 'n' roll"),
            toks(&["rock", "'n", "'", "roll"])
        );
    }

    #[test]
    fn ngrams_skip_placeholders() {
        let got = extract_ngrams(&toks(&["PersonX", "makes", "coffee"]), 2);
        let want: BTreeSet<String> = ["makes", "coffee", "makes coffee"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn ngrams_short_input() {
        let got = extract_ngrams(&toks(&["a"]), 3);
        assert_eq!(got.into_iter().collect::<Vec<_>>(), vec!["a".to_string()]);
    }

    #[test]
    fn ngrams_enumeration() {
        let got = extract_ngrams(&toks(&["a", "b", "c"]), 2);
        let want: BTreeSet<String> = ["a", "b", "c", "a b", "b c"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(got, want);
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(s in "[a-zA-Z' ,._!?-]{0,40}") {
            let once = tokenize(&s);
            let twice = tokenize(&detokenize(&once));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn tokenize_keeps_alphanumeric_content(s in "(PersonX |[a-z]{1,6}[ ,.'_]{0,2}){0,8}") {
            let strip = |t: &str| -> String {
                t.replace("PersonX", " ").replace("personx", " ")
                    .chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase()
            };
            let round = detokenize(&tokenize(&s));
            prop_assert_eq!(strip(&s), strip(&round));
        }
    }
}
