//! Recall@k and BLEU-2@k over ranked generations.
//!
//! Both metrics compare normalized strings: lowercase, punctuation replaced
//! by spaces, whitespace collapsed, and a leading `to ` removed.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub const DEFAULT_K: usize = 10;

pub fn normalize_text(s: &str) -> String {
    let cleaned: String = s
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .flat_map(char::to_lowercase)
        .collect();
    let mut words: Vec<&str> = cleaned.split_whitespace().collect();
    if words.len() > 1 && words[0] == "to" {
        words.remove(0);
    }
    words.join(" ")
}

/// One evaluated example. Construct with [`EvalRecord::new`] so that the
/// strings are normalized and the generations deduplicated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub event: String,
    pub relation: String,
    pub gold: BTreeSet<String>,
    pub generated: Vec<String>,
}

impl EvalRecord {
    pub fn new<G, H>(event: &str, relation: &str, gold: G, generated: H) -> Self
    where
        G: IntoIterator,
        G::Item: AsRef<str>,
        H: IntoIterator,
        H::Item: AsRef<str>,
    {
        let gold = gold
            .into_iter()
            .map(|g| normalize_text(g.as_ref()))
            .filter(|g| !g.is_empty())
            .collect();
        let mut seen = BTreeSet::new();
        let generated = generated
            .into_iter()
            .map(|g| normalize_text(g.as_ref()))
            .filter(|g| seen.insert(g.clone()))
            .collect();
        EvalRecord {
            event: event.to_string(),
            relation: relation.to_string(),
            gold,
            generated,
        }
    }

    fn top(&self, k: usize) -> &[String] {
        &self.generated[..self.generated.len().min(k)]
    }

    /// Fraction of gold strings found among the first `k` generations.
    pub fn recall(&self, k: usize) -> Option<f64> {
        if self.gold.is_empty() {
            return None;
        }
        let found = self
            .top(k)
            .iter()
            .filter(|g| self.gold.contains(*g))
            .count();
        Some(found as f64 / self.gold.len() as f64)
    }

    /// Mean sentence BLEU-2 of the first `k` generations against all gold strings.
    pub fn bleu2(&self, k: usize) -> Option<f64> {
        if self.gold.is_empty() {
            return None;
        }
        let refs: Vec<Vec<&str>> = self
            .gold
            .iter()
            .map(|g| g.split_whitespace().collect())
            .collect();
        let top = self.top(k);
        if top.is_empty() {
            return Some(0.0);
        }
        let total: f64 = top
            .iter()
            .map(|c| sentence_bleu2(&c.split_whitespace().collect::<Vec<_>>(), &refs))
            .sum();
        Some(total / top.len() as f64)
    }
}

fn ngram_counts<'a>(tokens: &[&'a str], n: usize) -> HashMap<Vec<&'a str>, usize> {
    let mut out = HashMap::new();
    for w in tokens.windows(n) {
        *out.entry(w.to_vec()).or_insert(0) += 1;
    }
    out
}

/// Clipped n-gram matches and candidate n-gram total.
fn clipped(candidate: &[&str], refs: &[Vec<&str>], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
    for r in refs {
        for (g, c) in ngram_counts(r, n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let matched = cand
        .iter()
        .map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0)))
        .sum();
    (matched, candidate.len().saturating_sub(n - 1))
}

/// Sentence BLEU-2 with uniform weights. Unigram precision is unsmoothed;
/// bigram precision is `(m + 1) / (c + 1)`. The brevity penalty uses the
/// reference length closest to the candidate (shorter on ties).
pub fn sentence_bleu2(candidate: &[&str], refs: &[Vec<&str>]) -> f64 {
    if candidate.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let (m1, c1) = clipped(candidate, refs, 1);
    if m1 == 0 {
        return 0.0;
    }
    let (m2, c2) = clipped(candidate, refs, 2);
    let p1 = m1 as f64 / c1 as f64;
    let p2 = (m2 as f64 + 1.0) / (c2 as f64 + 1.0);
    let c = candidate.len();
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&l| (l.abs_diff(c), l))
        .unwrap_or(c);
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    bp * (p1 * p2).sqrt()
}

/// Aggregate of one metric for one group of records.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub recall: f64,
    pub bleu2: f64,
    pub records: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub per_relation: BTreeMap<String, MetricRow>,
    /// Mean over all scored records.
    pub micro: MetricRow,
    /// Mean of the per-relation rows.
    pub macro_avg: MetricRow,
}

/// Recall@k per relation, as a percentage. Records with an empty gold set
/// are skipped.
pub fn recall_at_k(records: &[EvalRecord], k: usize) -> BTreeMap<String, f64> {
    evaluate(records, k)
        .per_relation
        .into_iter()
        .map(|(r, m)| (r, m.recall))
        .collect()
}

/// BLEU-2@k per relation, scaled to [0, 100].
pub fn bleu2_at_k(records: &[EvalRecord], k: usize) -> BTreeMap<String, f64> {
    evaluate(records, k)
        .per_relation
        .into_iter()
        .map(|(r, m)| (r, m.bleu2))
        .collect()
}

pub fn evaluate(records: &[EvalRecord], k: usize) -> EvalReport {
    #[derive(Default)]
    struct Acc {
        recall: f64,
        bleu: f64,
        n: usize,
        skipped: usize,
    }
    let mut by_rel: BTreeMap<&str, Acc> = BTreeMap::new();
    for rec in records {
        let acc = by_rel.entry(rec.relation.as_str()).or_default();
        match (rec.recall(k), rec.bleu2(k)) {
            (Some(r), Some(b)) => {
                acc.recall += r;
                acc.bleu += b;
                acc.n += 1;
            }
            _ => acc.skipped += 1,
        }
    }
    let row = |a: &Acc| MetricRow {
        recall: if a.n == 0 {
            0.0
        } else {
            100.0 * a.recall / a.n as f64
        },
        bleu2: if a.n == 0 {
            0.0
        } else {
            100.0 * a.bleu / a.n as f64
        },
        records: a.n,
        skipped: a.skipped,
    };
    let total = by_rel.values().fold(Acc::default(), |t, a| Acc {
        recall: t.recall + a.recall,
        bleu: t.bleu + a.bleu,
        n: t.n + a.n,
        skipped: t.skipped + a.skipped,
    });
    let per_relation: BTreeMap<String, MetricRow> = by_rel
        .iter()
        .map(|(r, a)| (r.to_string(), row(a)))
        .collect();
    let scored: Vec<&MetricRow> = per_relation.values().filter(|m| m.records > 0).collect();
    let macro_avg = if scored.is_empty() {
        MetricRow::default()
    } else {
        let n = scored.len() as f64;
        MetricRow {
            recall: scored.iter().map(|m| m.recall).sum::<f64>() / n,
            bleu2: scored.iter().map(|m| m.bleu2).sum::<f64>() / n,
            records: total.n,
            skipped: total.skipped,
        }
    };
    EvalReport {
        k,
        micro: row(&total),
        per_relation,
        macro_avg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(rel: &str, gold: &[&str], generated: &[&str]) -> EvalRecord {
        EvalRecord::new("PersonX acts", rel, gold, generated)
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_text("To be helpful."), "be helpful");
        assert_eq!(normalize_text("  NONE "), "none");
        assert_eq!(normalize_text("gets  thanked"), "gets thanked");
        assert_eq!(normalize_text("John's"), "john s");
        assert_eq!(normalize_text("to"), "to");
    }

    #[test]
    fn recall_set_arithmetic() {
        let r = rec("xIntent", &["a", "b", "c"], &["a", "x", "c"]);
        assert!((r.recall(10).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rec("xIntent", &["a"], &["b", "a"]).recall(10), Some(1.0));
    }

    #[test]
    fn recall_fixture_is_62_5() {
        let recs = vec![
            rec("xIntent", &["a"], &["a"]),
            rec("xIntent", &["a", "b"], &["b", "z"]),
            rec("xIntent", &["a"], &["q"]),
            rec("xIntent", &["a", "b"], &["b", "a"]),
            rec("xIntent", &[], &["a"]),
        ];
        let r = recall_at_k(&recs, 10);
        assert!((r["xIntent"] - 62.5).abs() < 1e-12);
        assert_eq!(evaluate(&recs, 10).per_relation["xIntent"].skipped, 1);
    }

    #[test]
    fn bleu_perfect_empty_and_oracle() {
        assert_eq!(
            sentence_bleu2(&["be", "helpful"], &[vec!["be", "helpful"]]),
            1.0
        );
        assert_eq!(sentence_bleu2(&[], &[vec!["be"]]), 0.0);
        // p1 = 2/3, p2 = (0 + 1) / (2 + 1), BP = 1
        let got = sentence_bleu2(&["be", "very", "helpful"], &[vec!["be", "helpful"]]);
        assert!((got - 0.471_404_520_791_031_7).abs() < 1e-12, "{got}");
        assert_eq!(rec("xIntent", &["a"], &[]).bleu2(10), Some(0.0));
    }

    #[test]
    fn brevity_penalty_applies_to_short_candidates() {
        // c = 1, r = 2: BP = e^(1 - 2), p1 = 1, p2 = 1/1
        let got = sentence_bleu2(&["helpful"], &[vec!["be", "helpful"]]);
        assert!((got - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn report_has_micro_and_macro() {
        let recs = vec![
            rec("xIntent", &["a"], &["a"]),
            rec("xReact", &["a"], &["b"]),
            rec("xReact", &["a"], &["b"]),
        ];
        let rep = evaluate(&recs, 10);
        assert_eq!(rep.per_relation.len(), 2);
        assert!((rep.micro.recall - 100.0 / 3.0).abs() < 1e-12);
        assert!((rep.macro_avg.recall - 50.0).abs() < 1e-12);
    }

    fn arb_records() -> impl Strategy<Value = Vec<EvalRecord>> {
        let word = proptest::sample::select(vec!["a", "b", "c", "d", "e f", "f e", "g"]);
        let one = (
            proptest::sample::select(vec!["xIntent", "xReact", "oReact"]),
            proptest::collection::vec(word.clone(), 0..4),
            proptest::collection::vec(word, 0..12),
        )
            .prop_map(|(r, g, c)| EvalRecord::new("e", r, g, c));
        proptest::collection::vec(one, 1..12)
    }

    proptest! {
        #[test]
        fn recall_monotone_in_k(recs in arb_records()) {
            let r5 = recall_at_k(&recs, 5);
            let r10 = recall_at_k(&recs, 10);
            for (rel, v) in &r5 {
                prop_assert!(r10[rel] >= *v);
            }
        }

        #[test]
        fn bounded_permutation_and_duplication_invariant(recs in arb_records()) {
            let base = evaluate(&recs, 10);
            for m in base.per_relation.values() {
                prop_assert!((0.0..=100.0).contains(&m.recall));
                prop_assert!((0.0..=100.0).contains(&m.bleu2));
            }
            let mut rev = recs.clone();
            rev.reverse();
            let r = evaluate(&rev, 10);
            let doubled: Vec<EvalRecord> = recs.iter().chain(&recs).cloned().collect();
            let d = evaluate(&doubled, 10);
            for (rel, m) in &base.per_relation {
                prop_assert!((r.per_relation[rel].recall - m.recall).abs() < 1e-9);
                prop_assert!((r.per_relation[rel].bleu2 - m.bleu2).abs() < 1e-9);
                prop_assert!((d.per_relation[rel].recall - m.recall).abs() < 1e-9);
                prop_assert!((d.per_relation[rel].bleu2 - m.bleu2).abs() < 1e-9);
            }
        }
    }
}
