//! End-to-end runs: memory assembly, vocabulary, training in any mode,
//! batch generation and evaluation, coverage, and the snippet-count sweep.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, TrainMode};
use crate::error::{Error, Result};
use crate::knowledge::{
    coverage, CoverageItem, CoverageReport, KeyPhraseTable, KnowledgeBase, KnowledgeEntry,
    KnowledgeSources, Lexicon, SnippetStore, TripleStore,
};
use crate::metrics::{self, EvalRecord, EvalReport};
use crate::model::{
    encode_example, load_embeddings, BeamConfig, Checkpoint, EncodedExample, Network,
};
use crate::text::{detokenize, tokenize, Dataset, Vocabulary};
use crate::trainer::{train_maml, train_multitask, train_single_task, EpochRecord, Task, TrainLog};

const BUNDLE_FORMAT: &str = "infergen-model";
pub const BUNDLE_VERSION: u32 = 1;

/// Builds the knowledge base the config asks for. Sources that are enabled
/// must have their file configured.
pub fn load_knowledge(cfg: &RunConfig) -> Result<KnowledgeBase> {
    let mut lexicon = Lexicon::default();
    if let Some(p) = &cfg.stopwords {
        lexicon = lexicon.with_stopword_file(p)?;
    }
    if let Some(p) = &cfg.pos_lexicon {
        lexicon = lexicon.with_pos_file(p)?;
    }
    let phrases = match &cfg.key_phrases {
        Some(p) => KeyPhraseTable::load(p)?,
        None => KeyPhraseTable::default(),
    };
    let triples = if cfg.knowledge.uses_triples() {
        TripleStore::load_tsv(cfg.require("triples", &cfg.triples)?)?
    } else {
        TripleStore::default()
    };
    let snippets = if cfg.knowledge.uses_web() {
        SnippetStore::load_jsonl(cfg.require("snippets", &cfg.snippets)?)?
    } else {
        SnippetStore::default()
    };
    Ok(KnowledgeBase {
        triples,
        snippets,
        phrases,
        lexicon,
        sources: cfg.knowledge,
        max_ngram: cfg.max_ngram,
        snippets_per_event: cfg.snippets_per_event,
        limit: cfg.memory_limit,
    })
}

/// Memory entries per example, computed once per distinct (event, relation).
pub fn memories(kb: &KnowledgeBase, ds: &Dataset) -> Result<Vec<Vec<KnowledgeEntry>>> {
    let mut cache: HashMap<(&str, &str), Vec<KnowledgeEntry>> = HashMap::new();
    let mut out = Vec::with_capacity(ds.len());
    for ex in &ds.examples {
        let rel = ds.relations.name(ex.relation);
        let key = (ex.event.as_str(), rel);
        let entries = match cache.entry(key) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(v) => {
                v.insert(kb.entries(&ex.event, &ex.event_tokens, rel)?)
            }
        };
        out.push(entries.clone());
    }
    Ok(out)
}

/// Vocabulary over events, targets and memory keys and values.
pub fn build_vocab(ds: &Dataset, memory: &[Vec<KnowledgeEntry>], min_count: usize) -> Vocabulary {
    let mut seqs: Vec<&[String]> = Vec::new();
    for ex in &ds.examples {
        seqs.push(&ex.event_tokens);
        seqs.push(&ex.target_tokens);
    }
    for e in memory.iter().flatten() {
        seqs.push(&e.key);
        seqs.push(&e.value);
    }
    Vocabulary::build(seqs, min_count)
}

/// The trained model(s) of one run: a single shared network, or one
/// network per relation in single-task mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub mode: TrainMode,
    pub models: Vec<Checkpoint>,
}

impl ModelBundle {
    pub fn new(mode: TrainMode, models: Vec<Checkpoint>) -> Self {
        ModelBundle {
            format: BUNDLE_FORMAT.to_string(),
            version: BUNDLE_VERSION,
            mode,
            models,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let b: ModelBundle = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if b.format != BUNDLE_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unexpected format tag `{}`",
                b.format
            )));
        }
        if b.version != BUNDLE_VERSION {
            return Err(Error::Checkpoint(format!(
                "bundle version {} is not supported",
                b.version
            )));
        }
        if b.models.is_empty() {
            return Err(Error::Checkpoint("bundle holds no models".into()));
        }
        for m in &b.models {
            m.validate()?;
        }
        Ok(b)
    }

    /// Relation names served, in model order.
    pub fn relations(&self) -> Vec<&str> {
        self.models
            .iter()
            .flat_map(|m| m.relations.iter().map(String::as_str))
            .collect()
    }

    /// The model serving `relation` and the relation's index within it.
    pub fn model_for(&self, relation: &str) -> Option<(usize, usize)> {
        self.models
            .iter()
            .enumerate()
            .find_map(|(i, m)| m.relation_index(relation).map(|r| (i, r)))
    }
}

/// A trained bundle and the per-epoch history of every model.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub bundle: ModelBundle,
    pub history: Vec<EpochRecord>,
}

fn tasks_for(
    ds: &Dataset,
    memory: &[Vec<KnowledgeEntry>],
    vocab: &Vocabulary,
    relations: &[String],
) -> Vec<Task<EncodedExample>> {
    relations
        .iter()
        .enumerate()
        .map(|(ri, name)| {
            let examples = ds
                .examples
                .iter()
                .zip(memory)
                .filter(|(ex, _)| ds.relations.name(ex.relation) == name)
                .map(|(ex, mem)| {
                    encode_example(vocab, ri, &ex.event_tokens, &ex.target_tokens, mem)
                })
                .collect();
            Task::new(name.clone(), examples)
        })
        .collect()
}

fn initial_params(
    cfg: &RunConfig,
    net: &Network,
    vocab: &Vocabulary,
) -> Result<crate::tensor::ParamSet> {
    let mut params = net.init_params(cfg.seed);
    if let Some(p) = &cfg.embeddings {
        load_embeddings(p, vocab, &mut params)?;
    }
    Ok(params)
}

/// Trains in the configured mode. The relations are those present in
/// `train`; dev examples of other relations are ignored.
pub fn train(
    cfg: &RunConfig,
    train: &Dataset,
    dev: Option<&Dataset>,
    kb: &KnowledgeBase,
    log: &mut TrainLog,
) -> Result<TrainRun> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training set has no examples".into()));
    }
    let train_mem = memories(kb, train)?;
    let vocab = build_vocab(train, &train_mem, cfg.min_count);
    let relations: Vec<String> = train
        .present_relations()
        .into_iter()
        .map(|r| train.relations.name(r).to_string())
        .collect();
    let dev_mem = match dev {
        Some(d) => memories(kb, d)?,
        None => Vec::new(),
    };
    let tcfg = cfg.train_config();
    let mut history = Vec::new();
    let models = match cfg.mode {
        TrainMode::Single => {
            let mut models = Vec::with_capacity(relations.len());
            for rel in &relations {
                let one = std::slice::from_ref(rel);
                let task = tasks_for(train, &train_mem, &vocab, one).remove(0);
                let dev_task = dev.map(|d| tasks_for(d, &dev_mem, &vocab, one).remove(0));
                let dev_task = dev_task.filter(|t| !t.examples.is_empty());
                let net = Network::new(cfg.model_config(), vocab.len(), 1)?;
                let params = initial_params(cfg, &net, &vocab)?;
                let out = train_single_task(&net, params, &task, dev_task.as_ref(), &tcfg, log)?;
                history.extend(out.history);
                models.push(Checkpoint::new(
                    cfg.model_config(),
                    vocab.clone(),
                    one.to_vec(),
                    out.params,
                ));
            }
            models
        }
        TrainMode::Multi | TrainMode::Maml => {
            let tasks = tasks_for(train, &train_mem, &vocab, &relations);
            let dev_tasks = match dev {
                Some(d) => tasks_for(d, &dev_mem, &vocab, &relations),
                None => Vec::new(),
            };
            let net = Network::new(cfg.model_config(), vocab.len(), relations.len())?;
            let params = initial_params(cfg, &net, &vocab)?;
            let out = if cfg.mode == TrainMode::Multi {
                train_multitask(&net, params, &tasks, &dev_tasks, &tcfg, log)?
            } else {
                train_maml(
                    &net,
                    params,
                    &tasks,
                    &dev_tasks,
                    &tcfg,
                    &cfg.maml_config(),
                    log,
                )?
            };
            history.extend(out.history);
            vec![Checkpoint::new(
                cfg.model_config(),
                vocab,
                relations,
                out.params,
            )]
        }
    };
    Ok(TrainRun {
        bundle: ModelBundle::new(cfg.mode, models),
        history,
    })
}

/// One generated candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    pub score: f64,
}

/// Gold and generated text of one (event, relation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub event: String,
    pub relation: String,
    pub gold: Vec<String>,
    pub generated: Vec<Generation>,
}

/// A bundle with its networks built once, ready for decoding.
pub struct Generator<'b> {
    bundle: &'b ModelBundle,
    nets: Vec<Network>,
}

impl<'b> Generator<'b> {
    pub fn new(bundle: &'b ModelBundle) -> Result<Self> {
        let nets = bundle
            .models
            .iter()
            .map(Checkpoint::network)
            .collect::<Result<_>>()?;
        Ok(Generator { bundle, nets })
    }

    /// Beam-search candidates for one event under one relation.
    pub fn generate(
        &self,
        kb: &KnowledgeBase,
        event: &str,
        relation: &str,
        beam: &BeamConfig,
    ) -> Result<Vec<Generation>> {
        let (mi, ri) = self
            .bundle
            .model_for(relation)
            .ok_or_else(|| Error::UnknownRelation {
                name: relation.to_string(),
                line: None,
            })?;
        let ck = &self.bundle.models[mi];
        let tokens = tokenize(event);
        if tokens.is_empty() {
            return Err(Error::EmptyInput("event text".into()));
        }
        let entries = kb.entries(event, &tokens, relation)?;
        let ex = encode_example(&ck.vocab, ri, &tokens, &[], &entries);
        let hyps = self.nets[mi].beam_search(&ck.params, &ex, beam)?;
        Ok(hyps
            .into_iter()
            .map(|h| Generation {
                text: detokenize(&ck.vocab.decode(&h.tokens)),
                score: h.score,
            })
            .collect())
    }
}

/// Predictions for every (event, relation) group of `test` plus the
/// metric report.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: EvalReport,
    pub predictions: Vec<Prediction>,
}

/// Decodes every (event, relation) group of `test` in parallel and scores
/// the top `beam.top_k` candidates against the group's targets.
pub fn evaluate(
    bundle: &ModelBundle,
    test: &Dataset,
    kb: &KnowledgeBase,
    beam: &BeamConfig,
) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::EmptyInput("test set has no examples".into()));
    }
    check_vocab_overlap(bundle, test)?;
    let generator = Generator::new(bundle)?;
    let groups = test.grouped_targets();
    let predictions: Vec<Prediction> = groups
        .par_iter()
        .map(|(event, rel, gold)| {
            let relation = test.relations.name(*rel).to_string();
            let generated = generator.generate(kb, event, &relation, beam)?;
            Ok(Prediction {
                event: event.clone(),
                relation,
                gold: gold.clone(),
                generated,
            })
        })
        .collect::<Result<_>>()?;
    let records: Vec<EvalRecord> = predictions
        .iter()
        .map(|p| {
            EvalRecord::new(
                &p.event,
                &p.relation,
                p.gold.iter().map(String::as_str),
                p.generated.iter().map(|g| g.text.as_str()),
            )
        })
        .collect();
    Ok(Evaluation {
        report: metrics::evaluate(&records, beam.top_k),
        predictions,
    })
}

/// A test set none of whose event words the model knows was almost
/// certainly paired with the wrong checkpoint.
fn check_vocab_overlap(bundle: &ModelBundle, test: &Dataset) -> Result<()> {
    let vocab = &bundle.models[0].vocab;
    let mut total = 0usize;
    let mut known = 0usize;
    for ex in &test.examples {
        for t in &ex.event_tokens {
            total += 1;
            known += usize::from(vocab.contains(t));
        }
    }
    if total > 0 && known == 0 {
        return Err(Error::VocabMismatch(format!(
            "none of the {total} event tokens of the test set are in the model vocabulary"
        )));
    }
    Ok(())
}

/// Coverage per source combination available in `kb`: `conceptnet` when
/// triples are loaded, `web` when snippets are, and `both` when both are.
pub fn coverage_by_source(
    kb: &KnowledgeBase,
    ds: &Dataset,
) -> Result<BTreeMap<String, CoverageReport>> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("dataset has no examples".into()));
    }
    let mut sources = Vec::new();
    if !kb.triples.is_empty() {
        sources.push(KnowledgeSources::ConceptNet);
    }
    if !kb.snippets.is_empty() {
        sources.push(KnowledgeSources::Web);
    }
    if sources.len() == 2 {
        sources.push(KnowledgeSources::Both);
    }
    if sources.is_empty() {
        return Err(Error::config(
            "triples",
            "coverage needs triples or snippets",
        ));
    }
    let groups = ds.grouped_targets();
    let mut out = BTreeMap::new();
    for s in sources {
        let items = groups
            .iter()
            .map(|(event, rel, gold)| {
                let relation = ds.relations.name(*rel);
                Ok(CoverageItem {
                    relation: relation.to_string(),
                    gold: gold.clone(),
                    entries: kb.entries_from(s, event, &tokenize(event), relation)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.insert(s.to_string(), coverage(&items, &kb.lexicon));
    }
    Ok(out)
}

/// One row of the snippet-count sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub count: usize,
    pub recall: f64,
    pub bleu2: f64,
    pub per_relation: BTreeMap<String, f64>,
}

/// Trains and evaluates once per snippet count with everything else fixed.
/// Count 0 reads no snippets at all, so it equals the run without web
/// knowledge.
pub fn ablate_snippets(
    cfg: &RunConfig,
    counts: &[usize],
    train_set: &Dataset,
    dev: Option<&Dataset>,
    test: &Dataset,
    kb: &KnowledgeBase,
) -> Result<Vec<AblationRow>> {
    if counts.is_empty() {
        return Err(Error::config(
            "counts",
            "at least one snippet count is required",
        ));
    }
    if !kb.sources.uses_web() {
        return Err(Error::config(
            "knowledge",
            "the snippet sweep needs knowledge = web or both",
        ));
    }
    let stored = kb.snippets.max_per_event();
    if let Some(&max) = counts.iter().max() {
        if max > stored {
            eprintln!(
                "warning: {max} snippets requested but at most {stored} are stored per event"
            );
        }
    }
    let mut rows = Vec::with_capacity(counts.len());
    for &count in counts {
        let mut kb_n = kb.clone();
        kb_n.snippets_per_event = count;
        let run = train(cfg, train_set, dev, &kb_n, &mut TrainLog::none())?;
        let ev = evaluate(&run.bundle, test, &kb_n, &cfg.beam_config())?;
        rows.push(AblationRow {
            count,
            recall: ev.report.micro.recall,
            bleu2: ev.report.micro.bleu2,
            per_relation: ev
                .report
                .per_relation
                .iter()
                .map(|(k, v)| (k.clone(), v.recall))
                .collect(),
        });
    }
    Ok(rows)
}

/// Plot-ready TSV: `count`, `recall_at_k`, `bleu2_at_k`, then one recall
/// column per relation.
pub fn ablation_tsv(rows: &[AblationRow]) -> String {
    let rels: Vec<&String> = rows
        .first()
        .map(|r| r.per_relation.keys().collect())
        .unwrap_or_default();
    let mut out = String::from("count\trecall_at_k\tbleu2_at_k");
    for r in &rels {
        out.push_str(&format!("\trecall_{r}"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{}\t{:.4}\t{:.4}",
            row.count, row.recall, row.bleu2
        ));
        for r in &rels {
            out.push_str(&format!(
                "\t{:.4}",
                row.per_relation.get(*r).copied().unwrap_or(0.0)
            ));
        }
        out.push('\n');
    }
    out
}
