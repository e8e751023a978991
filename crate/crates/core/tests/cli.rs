use std::fs;
use std::path::{Path, PathBuf};

use infergen::cli::{self, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use infergen::config::{RunConfig, TrainMode};
use infergen::experiment::{
    ablate_snippets, evaluate, load_knowledge, memories, train, ModelBundle,
};
use infergen::knowledge::KnowledgeSources;
use infergen::synthetic::{SyntheticConfig, SyntheticCorpus, SyntheticFiles};
use infergen::text::{write_tsv, Dataset};
use infergen::trainer::TrainLog;
use tempfile::TempDir;

struct Fixture {
    dir: TempDir,
    corpus: SyntheticCorpus,
    files: SyntheticFiles,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let corpus = SyntheticCorpus::generate(&SyntheticConfig {
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let files = corpus.write(&dir.path().join("data")).unwrap();
        Fixture { dir, corpus, files }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self) -> RunConfig {
        let mut cfg = RunConfig {
            word_dim: 8,
            relation_dim: 4,
            hidden: 8,
            epochs: 2,
            batch_size: 16,
            lr: Some(5e-3),
            beam_width: 4,
            max_len: 6,
            knowledge: KnowledgeSources::Both,
            out: self.path("out"),
            ..RunConfig::default()
        };
        self.files.apply(&mut cfg);
        cfg
    }

    /// Writes the small-model settings and data paths to a config file.
    fn config_file(&self) -> String {
        let p = self.path("run.cfg");
        fs::write(&p, self.config().to_text()).unwrap();
        p.to_str().unwrap().to_string()
    }
}

fn run(args: &[&str]) -> i32 {
    cli::run(std::iter::once("infergen").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&[]), EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(run(&["train", "--no-such-flag", "1"]), EXIT_USAGE);
    assert_eq!(run(&["train", "--epochs", "many"]), EXIT_USAGE);
    assert_eq!(run(&["train", "--mode", "sideways"]), EXIT_USAGE);
    // No training file configured.
    assert_eq!(run(&["train"]), EXIT_USAGE);
    assert_eq!(run(&["ablate", "--counts", "1,x"]), EXIT_USAGE);
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(run(&["--help"]), EXIT_OK);
    assert_eq!(run(&["--version"]), EXIT_OK);
    assert_eq!(run(&["train", "--help"]), EXIT_OK);
}

#[test]
fn config_file_errors_name_the_line() {
    let f = Fixture::new();
    let p = f.path("bad.cfg");
    fs::write(&p, "# comment\nepochs = 3\nwidth_of_beam = 4\n").unwrap();
    let err = RunConfig::resolve(Some(&p), [("seed", "1")])
        .unwrap_err()
        .to_string();
    assert!(err.contains("bad.cfg:3"), "{err}");
    assert_eq!(
        run(&["stats", "--config", s(&p), "--data", s(&f.files.train)]),
        EXIT_USAGE
    );
}

#[test]
fn data_errors_exit_2() {
    let f = Fixture::new();
    let missing = f.path("missing.tsv");
    assert_eq!(run(&["train", "--train", s(&missing)]), EXIT_DATA);
    assert_eq!(run(&["stats", "--data", s(&missing)]), EXIT_DATA);

    let garbled = f.path("garbled.tsv");
    fs::write(&garbled, "just one column\n").unwrap();
    assert_eq!(
        run(&["stats", "--data", s(&garbled), "--out", s(&f.path("o"))]),
        EXIT_DATA
    );

    let not_a_model = f.path("model.json");
    fs::write(&not_a_model, "{}").unwrap();
    assert_eq!(
        run(&[
            "evaluate",
            "--model",
            s(&not_a_model),
            "--test",
            s(&f.files.test),
            "--out",
            s(&f.path("o"))
        ]),
        EXIT_DATA
    );
}

#[test]
fn maml_needs_two_relations() {
    let f = Fixture::new();
    let only_intent = f.corpus.train.filter_events(|_| true);
    let mut one = Dataset::new(only_intent.mode, only_intent.relations.clone());
    for ex in &only_intent.examples {
        if only_intent.relations.name(ex.relation) == "xIntent" {
            one.push(&ex.event, "xIntent", &ex.target, None).unwrap();
        }
    }
    let p = f.path("one_relation.tsv");
    write_tsv(&p, &one).unwrap();
    let cfg = f.config_file();
    assert_eq!(
        run(&[
            "train",
            "--config",
            &cfg,
            "--train",
            s(&p),
            "--mode",
            "maml",
            "--out",
            s(&f.path("m"))
        ]),
        EXIT_DATA
    );
    let mut rc = f.config();
    rc.mode = TrainMode::Maml;
    let kb = load_knowledge(&rc).unwrap();
    let err = train(&rc, &one, None, &kb, &mut TrainLog::none())
        .err()
        .unwrap();
    assert!(matches!(err, infergen::Error::InsufficientData(_)), "{err}");
}

#[test]
fn empty_test_set_is_an_error() {
    let f = Fixture::new();
    let cfg = f.config();
    let kb = load_knowledge(&cfg).unwrap();
    let run_ = train(&cfg, &f.corpus.train, None, &kb, &mut TrainLog::none()).unwrap();
    let empty = f.corpus.test.filter_events(|_| false);
    assert!(evaluate(&run_.bundle, &empty, &kb, &cfg.beam_config()).is_err());
}

#[test]
fn train_generate_evaluate_round_trip() {
    let f = Fixture::new();
    let cfg = f.config_file();
    let out = f.path("run");
    assert_eq!(
        run(&[
            "train",
            "--config",
            &cfg,
            "--mode",
            "maml",
            "--dropout",
            "0.1",
            "--out",
            s(&out)
        ]),
        EXIT_OK
    );
    let model = out.join(cli::MODEL_FILE);
    assert!(model.exists());
    assert!(out.join("config.resolved").exists());
    let log = fs::read_to_string(out.join(cli::LOG_FILE)).unwrap();
    assert_eq!(log.lines().count(), 2);

    // generate picks up the knowledge paths from the stored config.
    let gen_out = f.path("gen");
    assert_eq!(
        run(&[
            "generate",
            "--model",
            s(&model),
            "--event",
            "PersonX buys a hammer",
            "--out",
            s(&gen_out)
        ]),
        EXIT_OK
    );
    let tsv = fs::read_to_string(gen_out.join("generations.tsv")).unwrap();
    assert!(tsv.starts_with("event\trelation\trank\ttext\tscore\n"));
    assert!(tsv.lines().count() > 1);
    assert_eq!(
        run(&[
            "generate",
            "--model",
            s(&model),
            "--event",
            "x",
            "--relation",
            "oWant",
            "--out",
            s(&gen_out)
        ]),
        EXIT_DATA
    );

    let eval_out = f.path("eval");
    assert_eq!(
        run(&["evaluate", "--model", s(&model), "--out", s(&eval_out)]),
        EXIT_OK
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eval_out.join("report.json")).unwrap()).unwrap();
    let rows: Vec<&String> = report["per_relation"].as_object().unwrap().keys().collect();
    assert_eq!(rows, ["xAttr", "xIntent", "xReact"]);
    let preds = fs::read_to_string(eval_out.join("predictions.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), f.corpus.test.grouped_targets().len());
}

#[test]
fn single_mode_without_knowledge_learns() {
    let f = Fixture::new();
    let mut cfg = f.config();
    cfg.mode = TrainMode::Single;
    cfg.knowledge = KnowledgeSources::None;
    cfg.epochs = 4;
    cfg.hidden = 16;
    cfg.word_dim = 16;
    cfg.lr = Some(1e-2);
    let kb = load_knowledge(&cfg).unwrap();
    let out = train(
        &cfg,
        &f.corpus.train,
        Some(&f.corpus.dev),
        &kb,
        &mut TrainLog::none(),
    )
    .unwrap();
    assert_eq!(out.bundle.models.len(), 3);
    let p = f.path("single.json");
    out.bundle.save(&p).unwrap();
    assert_eq!(ModelBundle::load(&p).unwrap(), out.bundle);
    // Per relation, epoch 1 and epoch 4 dev losses.
    for chunk in out.history.chunks(4) {
        let first = chunk[0].dev_loss.values().next().unwrap();
        let last = chunk[3].dev_loss.values().next().unwrap();
        assert!(last < first, "{chunk:?}");
    }
}

#[test]
fn memory_never_exceeds_limit() {
    let f = Fixture::new();
    // Many triples about every synthetic object.
    let mut triples = fs::read_to_string(&f.files.triples).unwrap();
    for obj in [
        "hammer", "pizza", "jacket", "truck", "novel", "lamp", "kettle", "drum", "guitar", "cake",
    ] {
        for i in 0..40 {
            triples.push_str(&format!("{obj}\tRelatedTo\tthing{i}\t1.0\n"));
        }
    }
    let p = f.path("many_triples.tsv");
    fs::write(&p, triples).unwrap();
    let mut cfg = f.config();
    cfg.triples = Some(p);
    let kb = load_knowledge(&cfg).unwrap();
    let mem = memories(&kb, &f.corpus.train).unwrap();
    assert!(mem.iter().all(|m| m.len() <= 30));
    assert!(mem.iter().any(|m| m.len() == 30));
}

#[test]
fn ablation_count_zero_equals_conceptnet_only() {
    let f = Fixture::new();
    let mut cfg = f.config();
    cfg.mode = TrainMode::Multi;
    cfg.epochs = 1;
    let kb = load_knowledge(&cfg).unwrap();
    let rows = ablate_snippets(&cfg, &[0, 3], &f.corpus.train, None, &f.corpus.test, &kb).unwrap();

    let mut cn = cfg.clone();
    cn.knowledge = KnowledgeSources::ConceptNet;
    let kb_cn = load_knowledge(&cn).unwrap();
    let run_ = train(&cn, &f.corpus.train, None, &kb_cn, &mut TrainLog::none()).unwrap();
    let ev = evaluate(&run_.bundle, &f.corpus.test, &kb_cn, &cn.beam_config()).unwrap();
    assert_eq!(rows[0].recall.to_bits(), ev.report.micro.recall.to_bits());
    assert_eq!(rows[0].bleu2.to_bits(), ev.report.micro.bleu2.to_bits());
    assert_eq!(rows.len(), 2);

    let cfg_file = f.config_file();
    let out = f.path("ablate");
    assert_eq!(
        run(&[
            "ablate",
            "--config",
            &cfg_file,
            "--mode",
            "multi",
            "--epochs",
            "1",
            "--counts",
            "0,3",
            "--out",
            s(&out)
        ]),
        EXIT_OK
    );
    let tsv = fs::read_to_string(out.join("ablation.tsv")).unwrap();
    let mut lines = tsv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "count\trecall_at_k\tbleu2_at_k\trecall_xAttr\trecall_xIntent\trecall_xReact"
    );
    assert!(lines
        .next()
        .unwrap()
        .starts_with(&format!("0\t{:.4}\t", ev.report.micro.recall)));

    assert_eq!(
        run(&[
            "ablate",
            "--config",
            &cfg_file,
            "--knowledge",
            "conceptnet",
            "--counts",
            "0",
            "--out",
            s(&out)
        ]),
        EXIT_USAGE
    );
}

#[test]
fn stats_and_coverage_reports() {
    let f = Fixture::new();
    let out = f.path("stats");
    assert_eq!(
        run(&["stats", "--data", s(&f.files.train), "--out", s(&out)]),
        EXIT_OK
    );
    let st: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert_eq!(st["relations"], 3);
    assert_eq!(
        st["triplets"].as_u64().unwrap() as usize,
        f.corpus.train.len()
    );

    let out = f.path("cov");
    assert_eq!(
        run(&[
            "coverage",
            "--data",
            s(&f.files.test),
            "--triples",
            s(&f.files.triples),
            "--out",
            s(&out)
        ]),
        EXIT_OK
    );
    let cov: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("coverage.json")).unwrap()).unwrap();
    assert_eq!(
        cov.as_object().unwrap().keys().collect::<Vec<_>>(),
        ["conceptnet"]
    );
    assert_eq!(
        run(&["coverage", "--data", s(&f.files.test), "--out", s(&out)]),
        EXIT_USAGE
    );
}
