//! Run configuration: a flat set of `key = value` settings.
//!
//! Values come from three layers, later ones winning: built-in defaults, an
//! optional config file, and command-line flags. Every run writes the
//! resolved settings next to its outputs so it can be repeated exactly.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeSources, DEFAULT_MEMORY_LIMIT};
use crate::model::{BeamConfig, ModelConfig};
use crate::text::DatasetMode;
use crate::trainer::{MamlConfig, OptimizerKind, TrainConfig};

/// File name of the resolved configuration inside an output directory.
pub const RESOLVED_CONFIG: &str = "config.resolved";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// One model per relation.
    Single,
    /// One shared model, relation-uniform batches.
    Multi,
    /// One shared model trained with look-ahead steps on the other relations.
    Maml,
}

impl FromStr for TrainMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(TrainMode::Single),
            "multi" => Ok(TrainMode::Multi),
            "maml" => Ok(TrainMode::Maml),
            other => Err(format!("unknown training mode `{other}`")),
        }
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainMode::Single => "single",
            TrainMode::Multi => "multi",
            TrainMode::Maml => "maml",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetMode,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub triples: Option<PathBuf>,
    pub snippets: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub key_phrases: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub pos_lexicon: Option<PathBuf>,
    pub out: PathBuf,
    pub mode: TrainMode,
    pub knowledge: KnowledgeSources,
    pub snippets_per_event: usize,
    pub memory_limit: usize,
    pub max_ngram: usize,
    pub min_count: usize,
    pub word_dim: usize,
    pub relation_dim: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub init_scale: f64,
    pub feed_prev_state_as_input: bool,
    /// `None` picks the dataset default: 2e-4 for ATOMIC, 1e-4 otherwise.
    pub lr: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub alpha: f64,
    pub beta: f64,
    pub first_order: bool,
    pub fd_epsilon: f64,
    pub beam_width: usize,
    pub max_len: usize,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let train = TrainConfig::default();
        let maml = MamlConfig::default();
        let beam = BeamConfig::default();
        RunConfig {
            dataset: DatasetMode::Generic,
            train: None,
            dev: None,
            test: None,
            triples: None,
            snippets: None,
            embeddings: None,
            key_phrases: None,
            stopwords: None,
            pos_lexicon: None,
            out: PathBuf::from("run"),
            mode: TrainMode::Multi,
            knowledge: KnowledgeSources::None,
            snippets_per_event: 10,
            memory_limit: DEFAULT_MEMORY_LIMIT,
            max_ngram: 3,
            min_count: 1,
            word_dim: model.word_dim,
            relation_dim: model.relation_dim,
            hidden: model.hidden,
            dropout: model.dropout,
            init_scale: model.init_scale,
            feed_prev_state_as_input: model.feed_prev_state_as_input,
            lr: None,
            epochs: train.epochs,
            batch_size: train.batch_size,
            optimizer: train.optimizer,
            alpha: maml.alpha,
            beta: maml.beta,
            first_order: maml.first_order,
            fd_epsilon: maml.fd_epsilon,
            beam_width: beam.width,
            max_len: beam.max_len,
            top_k: beam.top_k,
            seed: 0,
        }
    }
}

/// Every settable key with a one-line description, in resolved-file order.
pub const KEYS: &[(&str, &str)] = &[
    ("dataset", "dataset layout: event2mind, atomic or generic"),
    ("train", "training data file or directory"),
    ("dev", "development data file or directory"),
    ("test", "test data file or directory"),
    (
        "triples",
        "knowledge triples TSV (subject, relation, object, weight)",
    ),
    (
        "snippets",
        "search snippets JSONL (event, query, rank, text)",
    ),
    ("embeddings", "pretrained word vectors in GloVe text format"),
    (
        "key_phrases",
        "relation key-phrase table (defaults to the shipped one)",
    ),
    ("stopwords", "extra stop words, one per line"),
    (
        "pos_lexicon",
        "extra part-of-speech entries, word<TAB>class",
    ),
    ("out", "output directory"),
    ("mode", "training mode: single, multi or maml"),
    ("knowledge", "memory sources: none, conceptnet, web or both"),
    (
        "snippets_per_event",
        "snippets read per (event, relation), lowest rank first",
    ),
    (
        "memory_limit",
        "largest number of memory entries per example",
    ),
    ("max_ngram", "longest n-gram used for retrieval"),
    ("min_count", "minimum token count for the vocabulary"),
    ("word_dim", "word embedding size"),
    ("relation_dim", "relation embedding size"),
    ("hidden", "encoder hidden size per direction"),
    ("dropout", "dropout on encoder inputs"),
    ("init_scale", "uniform initialization bound"),
    (
        "feed_prev_state_as_input",
        "also feed the previous decoder state to the decoder GRU",
    ),
    (
        "lr",
        "learning rate (default 0.0002 for atomic, 0.0001 otherwise)",
    ),
    ("epochs", "training epochs"),
    ("batch_size", "examples per batch"),
    ("optimizer", "adam or sgd"),
    ("alpha", "look-ahead step size"),
    ("beta", "weight of the meta-test gradient"),
    ("first_order", "first-order meta-gradient"),
    (
        "fd_epsilon",
        "finite-difference step for the second-order meta-gradient",
    ),
    ("beam_width", "beam width"),
    ("max_len", "longest generated sequence"),
    ("top_k", "candidates kept per example"),
    ("seed", "random seed"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e: T::Err| Error::config(key, format!("cannot parse {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected true or false, found {value:?}"),
        )),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = parse(key, v)?,
            "train" => self.train = path(v),
            "dev" => self.dev = path(v),
            "test" => self.test = path(v),
            "triples" => self.triples = path(v),
            "snippets" => self.snippets = path(v),
            "embeddings" => self.embeddings = path(v),
            "key_phrases" => self.key_phrases = path(v),
            "stopwords" => self.stopwords = path(v),
            "pos_lexicon" => self.pos_lexicon = path(v),
            "out" => self.out = path(v).ok_or_else(|| Error::config(key, "must not be empty"))?,
            "mode" => self.mode = parse(key, v)?,
            "knowledge" => self.knowledge = parse(key, v)?,
            "snippets_per_event" => self.snippets_per_event = parse(key, v)?,
            "memory_limit" => self.memory_limit = parse(key, v)?,
            "max_ngram" => self.max_ngram = parse(key, v)?,
            "min_count" => self.min_count = parse(key, v)?,
            "word_dim" => self.word_dim = parse(key, v)?,
            "relation_dim" => self.relation_dim = parse(key, v)?,
            "hidden" => self.hidden = parse(key, v)?,
            "dropout" => self.dropout = parse(key, v)?,
            "init_scale" => self.init_scale = parse(key, v)?,
            "feed_prev_state_as_input" => self.feed_prev_state_as_input = parse_bool(key, v)?,
            "lr" => {
                self.lr = if v.is_empty() {
                    None
                } else {
                    Some(parse(key, v)?)
                }
            }
            "epochs" => self.epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "optimizer" => {
                self.optimizer = match v.to_ascii_lowercase().as_str() {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected adam or sgd, found {v:?}"),
                        ))
                    }
                }
            }
            "alpha" => self.alpha = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "first_order" => self.first_order = parse_bool(key, v)?,
            "fd_epsilon" => self.fd_epsilon = parse(key, v)?,
            "beam_width" => self.beam_width = parse(key, v)?,
            "max_len" => self.max_len = parse(key, v)?,
            "top_k" => self.top_k = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            _ => return Err(Error::config(key, "unknown setting")),
        }
        Ok(())
    }

    /// The current value of `key` as it would be written to a config file.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "dataset" => self.dataset.to_string(),
            "train" => show_path(&self.train),
            "dev" => show_path(&self.dev),
            "test" => show_path(&self.test),
            "triples" => show_path(&self.triples),
            "snippets" => show_path(&self.snippets),
            "embeddings" => show_path(&self.embeddings),
            "key_phrases" => show_path(&self.key_phrases),
            "stopwords" => show_path(&self.stopwords),
            "pos_lexicon" => show_path(&self.pos_lexicon),
            "out" => self.out.display().to_string(),
            "mode" => self.mode.to_string(),
            "knowledge" => self.knowledge.to_string(),
            "snippets_per_event" => self.snippets_per_event.to_string(),
            "memory_limit" => self.memory_limit.to_string(),
            "max_ngram" => self.max_ngram.to_string(),
            "min_count" => self.min_count.to_string(),
            "word_dim" => self.word_dim.to_string(),
            "relation_dim" => self.relation_dim.to_string(),
            "hidden" => self.hidden.to_string(),
            "dropout" => self.dropout.to_string(),
            "init_scale" => self.init_scale.to_string(),
            "feed_prev_state_as_input" => self.feed_prev_state_as_input.to_string(),
            "lr" => self.lr().to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "optimizer" => match self.optimizer {
                OptimizerKind::Adam => "adam".into(),
                OptimizerKind::Sgd => "sgd".into(),
            },
            "alpha" => self.alpha.to_string(),
            "beta" => self.beta.to_string(),
            "first_order" => self.first_order.to_string(),
            "fd_epsilon" => self.fd_epsilon.to_string(),
            "beam_width" => self.beam_width.to_string(),
            "max_len" => self.max_len.to_string(),
            "top_k" => self.top_k.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are
    /// skipped; a malformed line or unknown key is an error naming the line.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("{}:{}", origin.display(), i + 1),
                    format!("expected `key = value`, found {line:?}"),
                )
            })?;
            self.set(key.trim(), value).map_err(|e| match e {
                Error::Config { field, reason } => {
                    Error::config(field, format!("{reason} ({}:{})", origin.display(), i + 1))
                }
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text, path)
    }

    /// Defaults, then `file`, then `overrides` in order.
    pub fn resolve<'a>(
        file: Option<&Path>,
        overrides: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(f) = file {
            cfg.apply_file(f)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn lr(&self) -> f64 {
        self.lr.unwrap_or(match self.dataset {
            DatasetMode::Atomic => 2e-4,
            _ => 1e-4,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.memory_limit == 0 {
            return Err(Error::config("memory_limit", "must be at least 1"));
        }
        if self.max_ngram == 0 {
            return Err(Error::config("max_ngram", "must be at least 1"));
        }
        if self.top_k == 0 {
            return Err(Error::config("top_k", "must be at least 1"));
        }
        if self.beam_width == 0 {
            return Err(Error::config("beam_width", "must be at least 1"));
        }
        if self.max_len == 0 {
            return Err(Error::config("max_len", "must be at least 1"));
        }
        self.train_config().validate()?;
        self.maml_config().validate()?;
        crate::model::Network::new(self.model_config(), crate::text::RESERVED.len(), 1).map(|_| ())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            word_dim: self.word_dim,
            relation_dim: self.relation_dim,
            hidden: self.hidden,
            dropout: self.dropout,
            init_scale: self.init_scale,
            feed_prev_state_as_input: self.feed_prev_state_as_input,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            optimizer: self.optimizer,
            dropout: self.dropout > 0.0,
        }
    }

    pub fn maml_config(&self) -> MamlConfig {
        MamlConfig {
            alpha: self.alpha,
            beta: self.beta,
            first_order: self.first_order,
            fd_epsilon: self.fd_epsilon,
        }
    }

    pub fn beam_config(&self) -> BeamConfig {
        BeamConfig {
            width: self.beam_width,
            max_len: self.max_len,
            top_k: self.top_k,
        }
    }

    /// All settings as `key = value` lines in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|(k, _)| format!("{k} = {}\n", self.get(k).expect("every key has a value")))
            .collect()
    }

    /// Writes [`RunConfig::to_text`] to `dir/config.resolved`.
    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(RESOLVED_CONFIG);
        fs::write(&path, self.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub(crate) fn require<'a>(&self, field: &str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::config(field, "a path is required for this command"))
    }
}
