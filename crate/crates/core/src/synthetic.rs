//! A generated three-relation corpus with known structure.
//!
//! Events are `PersonX <verb> the <object>` over 10 verbs and 5 object
//! classes (50 patterns, 4 objects per class). Targets follow fixed rules:
//! `xIntent` is decided by the verb, `xReact` by the object class, `xAttr`
//! by the verb group. A chosen fraction of (event, relation) pairs instead
//! get a random two-word target that appears only in that pair's top
//! search snippet, so only a model reading the web memory can produce it.
//! Every pair also gets its rule target as a snippet, lower-ranked noise
//! snippets for the other queries, and each object has triples that never
//! mention a target.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::knowledge::{build_queries, KeyPhraseTable, Lexicon};
use crate::text::{tokenize, write_tsv, Dataset, DatasetMode, RelationSet};

/// Relations whose first key phrases differ, so each gets its own top
/// snippet. (`xReact` and `oReact` share every query.)
pub const SYNTHETIC_RELATIONS: [&str; 3] = ["xIntent", "xReact", "xAttr"];

const VERBS: [(&str, &str); 10] = [
    ("cleans", "to be tidy"),
    ("fixes", "to be useful"),
    ("paints", "to be creative"),
    ("sells", "to earn money"),
    ("borrows", "to save money"),
    ("hides", "to keep secrets"),
    ("carries", "to help out"),
    ("washes", "to stay clean"),
    ("builds", "to make things"),
    ("gives", "to be kind"),
];

const CLASSES: [(&str, [&str; 4]); 5] = [
    ("proud", ["hammer", "wrench", "shovel", "ladder"]),
    ("satisfied", ["pizza", "salad", "soup", "cake"]),
    ("stylish", ["jacket", "scarf", "sweater", "boots"]),
    ("excited", ["bicycle", "truck", "scooter", "canoe"]),
    ("curious", ["novel", "atlas", "journal", "textbook"]),
];

const ATTRS: [&str; 3] = ["hardworking", "careful", "generous"];

const PLANT_ADJ: [&str; 8] = [
    "crimson", "velvet", "amber", "silent", "rapid", "gentle", "frozen", "golden",
];
const PLANT_NOUN: [&str; 8] = [
    "harbor", "meadow", "lantern", "comet", "orchard", "canyon", "glacier", "falcon",
];

const NOISE: [&str; 12] = [
    "weather", "forecast", "discount", "coupon", "stadium", "ticket", "recipe", "podcast",
    "museum", "traffic", "lottery", "festival",
];
const PLACES: [&str; 6] = ["garage", "kitchen", "closet", "street", "library", "attic"];
const USES: [&str; 6] = ["work", "eating", "warmth", "travel", "reading", "storage"];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    /// Share of (event, relation) pairs whose target only the snippets carry.
    pub planted_fraction: f64,
    pub test_fraction: f64,
    pub dev_fraction: f64,
    /// Noise snippets per (event, relation) in addition to the target one.
    pub noise_snippets: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 0,
            planted_fraction: 0.2,
            test_fraction: 0.2,
            dev_fraction: 0.1,
            noise_snippets: 3,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
struct SnippetLine {
    event: String,
    query: String,
    rank: u32,
    text: String,
}

/// The generated splits and knowledge, plus which test pairs are planted.
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
    /// `(event, relation)` pairs whose target comes from a planted snippet.
    pub planted: Vec<(String, String)>,
    triples: Vec<(String, String, String)>,
    snippets: Vec<SnippetLine>,
}

/// Paths of a written corpus.
#[derive(Clone, Debug)]
pub struct SyntheticFiles {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    pub triples: PathBuf,
    pub snippets: PathBuf,
}

impl SyntheticFiles {
    /// Points `cfg` at these files.
    pub fn apply(&self, cfg: &mut RunConfig) {
        cfg.dataset = DatasetMode::Generic;
        cfg.train = Some(self.train.clone());
        cfg.dev = Some(self.dev.clone());
        cfg.test = Some(self.test.clone());
        cfg.triples = Some(self.triples.clone());
        cfg.snippets = Some(self.snippets.clone());
    }
}

fn rule_target(verb: usize, class: usize, relation: usize) -> String {
    match relation {
        0 => VERBS[verb].1.to_string(),
        1 => CLASSES[class].0.to_string(),
        _ => ATTRS[verb % ATTRS.len()].to_string(),
    }
}

impl SyntheticCorpus {
    pub fn generate(cfg: &SyntheticConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&cfg.planted_fraction) {
            return Err(Error::config("planted_fraction", "must be in [0, 1]"));
        }
        if !(cfg.test_fraction > 0.0
            && cfg.dev_fraction >= 0.0
            && cfg.test_fraction + cfg.dev_fraction < 1.0)
        {
            return Err(Error::config(
                "test_fraction",
                "test and dev shares must leave training events",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let phrases = KeyPhraseTable::default();
        let lexicon = Lexicon::default();

        let mut events: Vec<(String, usize, usize)> = Vec::new();
        for (v, (verb, _)) in VERBS.iter().enumerate() {
            for (c, (_, objects)) in CLASSES.iter().enumerate() {
                for obj in objects {
                    events.push((format!("PersonX {verb} the {obj}"), v, c));
                }
            }
        }

        // Split by event, then plant the same share of pairs in every split.
        let mut order: Vec<usize> = (0..events.len()).collect();
        order.shuffle(&mut rng);
        let n_test = ((cfg.test_fraction * events.len() as f64).round() as usize).max(1);
        let n_dev = (cfg.dev_fraction * events.len() as f64).round() as usize;
        let mut split_of = vec![0usize; events.len()];
        for (pos, &e) in order.iter().enumerate() {
            split_of[e] = if pos < n_test {
                2
            } else if pos < n_test + n_dev {
                1
            } else {
                0
            };
        }
        let n_rel = SYNTHETIC_RELATIONS.len();
        let mut planted_flag = vec![false; events.len() * n_rel];
        for which in 0..3 {
            let mut pairs: Vec<usize> = (0..events.len() * n_rel)
                .filter(|p| split_of[p / n_rel] == which)
                .collect();
            pairs.shuffle(&mut rng);
            let n_planted = (cfg.planted_fraction * pairs.len() as f64).round() as usize;
            for &p in &pairs[..n_planted] {
                planted_flag[p] = true;
            }
        }

        let mut targets: Vec<Vec<String>> = vec![Vec::new(); events.len()];
        let mut snippets = Vec::new();
        // Relations may share a query; ranks are per (event, query).
        let mut next_rank: HashMap<(usize, String), u32> = HashMap::new();
        let mut rank_for = |e: usize, q: &str| {
            let r = next_rank.entry((e, q.to_string())).or_insert(0);
            *r += 1;
            *r
        };
        for (e, (event, v, c)) in events.iter().enumerate() {
            for (r, rel) in SYNTHETIC_RELATIONS.iter().enumerate() {
                let target = if planted_flag[e * n_rel + r] {
                    format!(
                        "{} {}",
                        PLANT_ADJ[rng.gen_range(0..PLANT_ADJ.len())],
                        PLANT_NOUN[rng.gen_range(0..PLANT_NOUN.len())]
                    )
                } else {
                    rule_target(*v, *c, r)
                };
                let queries = build_queries(&tokenize(event), rel, &phrases, &lexicon)?;
                snippets.push(SnippetLine {
                    event: event.clone(),
                    query: queries[0].clone(),
                    rank: rank_for(e, &queries[0]),
                    text: target.clone(),
                });
                for k in 0..cfg.noise_snippets {
                    // Noise goes to the other queries in turn.
                    let query = match queries.len() {
                        1 => queries[0].clone(),
                        n => queries[1 + k % (n - 1)].clone(),
                    };
                    let rank = rank_for(e, &query);
                    let words: Vec<&str> = NOISE.choose_multiple(&mut rng, 3).copied().collect();
                    snippets.push(SnippetLine {
                        event: event.clone(),
                        query,
                        rank,
                        text: words.join(" "),
                    });
                }
                targets[e].push(target);
            }
        }

        let mut triples = Vec::new();
        for (_, objects) in CLASSES.iter() {
            for obj in objects {
                triples.push((
                    obj.to_string(),
                    "AtLocation".to_string(),
                    PLACES[rng.gen_range(0..PLACES.len())].to_string(),
                ));
                triples.push((
                    obj.to_string(),
                    "UsedFor".to_string(),
                    USES[rng.gen_range(0..USES.len())].to_string(),
                ));
            }
        }

        let relations = RelationSet::new(SYNTHETIC_RELATIONS);
        let mut split = [
            Dataset::new(DatasetMode::Generic, relations.clone()),
            Dataset::new(DatasetMode::Generic, relations.clone()),
            Dataset::new(DatasetMode::Generic, relations),
        ];
        let mut planted = Vec::new();
        for &e in &order {
            let which = split_of[e];
            for (r, rel) in SYNTHETIC_RELATIONS.iter().enumerate() {
                split[which].push(&events[e].0, rel, &targets[e][r], None)?;
                if which == 2 && planted_flag[e * n_rel + r] {
                    planted.push((events[e].0.clone(), rel.to_string()));
                }
            }
        }
        let [train, dev, test] = split;
        Ok(SyntheticCorpus {
            train,
            dev,
            test,
            planted,
            triples,
            snippets,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<SyntheticFiles> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = SyntheticFiles {
            train: dir.join("train.tsv"),
            dev: dir.join("dev.tsv"),
            test: dir.join("test.tsv"),
            triples: dir.join("triples.tsv"),
            snippets: dir.join("snippets.jsonl"),
        };
        write_tsv(&files.train, &self.train)?;
        write_tsv(&files.dev, &self.dev)?;
        write_tsv(&files.test, &self.test)?;
        let triples: String = self
            .triples
            .iter()
            .map(|(s, r, o)| format!("{s}\t{r}\t{o}\t1.0\n"))
            .collect();
        fs::write(&files.triples, triples).map_err(|e| Error::io(&files.triples, e))?;
        let snippets: String = self
            .snippets
            .iter()
            .map(|s| serde_json::to_string(s).expect("snippets serialize") + "\n")
            .collect();
        fs::write(&files.snippets, snippets).map_err(|e| Error::io(&files.snippets, e))?;
        Ok(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{SnippetStore, TripleStore};

    #[test]
    fn shape_and_planted_share() {
        let c = SyntheticCorpus::generate(&SyntheticConfig::default()).unwrap();
        let total = c.train.len() + c.dev.len() + c.test.len();
        assert_eq!(total, 600);
        assert_eq!(c.test.stats().events, 40);
        assert_eq!(c.test.stats().relations, 3);
        let planted_total = c
            .snippets
            .iter()
            .filter(|s| s.rank == 1 && PLANT_ADJ.iter().any(|a| s.text.starts_with(a)))
            .count();
        assert_eq!(planted_total, 120);
        assert_eq!(c.planted.len(), 24);
    }

    #[test]
    fn generation_is_seeded() {
        let a = SyntheticCorpus::generate(&SyntheticConfig::default()).unwrap();
        let b = SyntheticCorpus::generate(&SyntheticConfig::default()).unwrap();
        let c = SyntheticCorpus::generate(&SyntheticConfig {
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(a.train, b.train);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn written_files_load() {
        let dir = tempfile::tempdir().unwrap();
        let c = SyntheticCorpus::generate(&SyntheticConfig::default()).unwrap();
        let f = c.write(dir.path()).unwrap();
        let store = SnippetStore::load_jsonl(&f.snippets).unwrap();
        assert_eq!(store.len(), 600 * 4);
        assert_eq!(TripleStore::load_tsv(&f.triples).unwrap().len(), 40);
        let back = crate::text::load_dataset(&f.test, DatasetMode::Generic).unwrap();
        assert_eq!(back.len(), c.test.len());
    }
}
