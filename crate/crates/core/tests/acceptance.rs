//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Built with `harness = false` so the lines appear in order and are never
//! captured. The process fails when any criterion fails, except those in
//! the known-unattainable list printed at the end.
//!
//! Set `INFERGEN_ACCEPTANCE=1,3` to run a subset.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use infergen::cli;
use infergen::config::{RunConfig, TrainMode};
use infergen::experiment::{evaluate, load_knowledge, train};
use infergen::knowledge::{
    build_queries, coverage, filter_content_words, CoverageItem, CoverageReport, KeyPhraseTable,
    KnowledgeEntry, KnowledgeSources, Lexicon, Source, SNIPPET_VALUE_LIMIT,
};
use infergen::metrics::{bleu2_at_k, recall_at_k, EvalRecord};
use infergen::model::{encode_example, ModelConfig, Network};
use infergen::synthetic::{SyntheticConfig, SyntheticCorpus};
use infergen::tensor::{grad_check_params, Optimizer, Sgd, TensorError};
use infergen::text::{
    is_placeholder, is_punctuation, tokenize, write_tsv, Dataset, DatasetMode, Vocabulary, RESERVED,
};
use infergen::trainer::{
    maml_epoch, maml_rounds, maml_step, BatchStream, MamlConfig, Objective, OptimizerKind,
    QuadraticToy, Task, TrainConfig, TrainLog,
};
use infergen::Error;

struct Line {
    id: &'static str,
    pass: bool,
    /// Fails for a documented reason outside this implementation.
    known: bool,
}

fn report(id: &'static str, name: &str, pass: bool, detail: String) -> Line {
    println!(
        "[{}] {id} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    Line {
        id,
        pass,
        known: false,
    }
}

fn known_failure(id: &'static str, name: &str, detail: String) -> Line {
    println!("[FAIL] {id} {name}: {detail}");
    Line {
        id,
        pass: false,
        known: true,
    }
}

fn main() {
    let only: Option<HashSet<String>> = std::env::var("INFERGEN_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').map(|s| s.trim().to_string()).collect());
    let wanted = |id: &str| only.as_ref().is_none_or(|s| s.contains(id));
    let mut lines = Vec::new();
    if wanted("1") {
        lines.push(gradient_fidelity());
    }
    if wanted("2") {
        lines.extend(maml_scalar_oracle());
    }
    if wanted("3") {
        lines.push(overfit());
    }
    if wanted("4") {
        lines.extend(synthetic_study());
    }
    if wanted("5") {
        lines.extend(dataset_statistics());
    }
    if wanted("6") {
        lines.push(metric_oracles());
    }
    if wanted("7") {
        lines.extend(coverage_methodology());
    }
    if wanted("8") {
        lines.push(determinism());
    }
    let known: Vec<&str> = lines
        .iter()
        .filter(|l| !l.pass && l.known)
        .map(|l| l.id)
        .collect();
    let failed: Vec<&str> = lines
        .iter()
        .filter(|l| !l.pass && !l.known)
        .map(|l| l.id)
        .collect();
    println!(
        "acceptance: {} passed, {} failed, {} known-unattainable {:?}",
        lines.iter().filter(|l| l.pass).count(),
        failed.len(),
        known.len(),
        known
    );
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}

fn unwrap_tensor(e: Error) -> TensorError {
    match e {
        Error::Tensor(t) => t,
        other => panic!("{other}"),
    }
}

fn entry(key: &str, value: &str, source: Source) -> KnowledgeEntry {
    KnowledgeEntry {
        key: tokenize(key),
        value: tokenize(value),
        source,
        score: 1.0,
    }
}

// 1. Analytic gradients of the sequence loss against central differences.
fn gradient_fidelity() -> Line {
    let start = Instant::now();
    let words = [
        "makes", "coffee", "to", "be", "awake", "helpful", "kitchen", "cup", "at", "location",
    ];
    let vocab = Vocabulary::from_tokens(
        RESERVED
            .iter()
            .chain(&words)
            .map(|s| s.to_string())
            .collect(),
    )
    .unwrap();
    let cfg = ModelConfig {
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let net = Network::new(cfg, vocab.len(), 2).unwrap();
    let params = net.init_params(7);
    let exs = [
        encode_example(
            &vocab,
            0,
            &tokenize("PersonX makes coffee"),
            &tokenize("to be awake"),
            &[
                entry("coffee at location", "kitchen", Source::ConceptNet),
                entry("makes coffee why", "awake", Source::Web),
            ],
        ),
        encode_example(
            &vocab,
            1,
            &tokenize("PersonX makes PersonY 's coffee"),
            &tokenize("be helpful"),
            &[entry("cup", "coffee", Source::ConceptNet)],
        ),
    ];
    let f = |tape: &mut infergen::tensor::Tape, vars: &[infergen::tensor::Var]| {
        let b = net.bound(vars);
        let mut losses = Vec::new();
        for ex in &exs {
            losses.push(b.sequence_loss(tape, ex, None).map_err(unwrap_tensor)?);
        }
        let total = tape.add_n(&losses)?;
        Ok(tape.scale(total, 0.5))
    };
    let blocks = grad_check_params(&params, f, 1e-4, Some(64)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let worst = blocks
        .iter()
        .max_by(|a, b| a.check.max_rel_error.total_cmp(&b.check.max_rel_error))
        .unwrap();
    let all = blocks.iter().all(|b| b.check.passed(1e-4));
    let coords: usize = blocks.iter().map(|b| b.check.coords_checked).sum();
    report(
        "1",
        "gradient fidelity",
        all && secs < 60.0,
        format!(
            "{} blocks, {coords} coordinates, worst relative error {:.2e} ({}), {secs:.1}s",
            blocks.len(),
            worst.check.max_rel_error,
            worst.name
        ),
    )
}

// 2. Scalar MAML oracle and the β = 0 collapse onto multi-task training.
fn maml_scalar_oracle() -> Vec<Line> {
    let sgd = TrainConfig {
        lr: 0.1,
        epochs: 1,
        batch_size: 1,
        seed: 0,
        optimizer: OptimizerKind::Sgd,
        dropout: false,
    };
    let mut theta = QuadraticToy::params(1.0);
    maml_step(
        &QuadraticToy,
        &mut theta,
        &mut Sgd { lr: 0.1 },
        &[0.0],
        &[0.0],
        &[vec![2.0]],
        &MamlConfig::default(),
        &sgd,
        0,
    )
    .unwrap();
    let got = QuadraticToy::theta(&theta);
    let hand = 1.0 - 0.1 * (0.01 * 1.001 + 0.99 * 1.0);
    let mut out = vec![report(
        "2a",
        "MAML scalar round",
        (got - hand).abs() < 1e-12 && format!("{got:.4}") == format!("{hand:.4}"),
        format!("theta {got:.6} vs hand computation {hand:.6}"),
    )];
    out.push(known_failure(
        "2a-literal",
        "MAML scalar round vs stated 0.8990",
        format!(
            "got {got:.4}; the stated 0.8990 does not follow from its own expression 1 - 0.1(0.01*1.001 + 0.99*1)"
        ),
    ));

    let tasks = vec![
        Task::new("t0", vec![0.0, 0.0]),
        Task::new("t2", vec![2.0, 2.0]),
    ];
    let cfg = TrainConfig {
        lr: 0.05,
        optimizer: OptimizerKind::Adam,
        ..sgd
    };
    let maml = MamlConfig {
        beta: 0.0,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut streams: Vec<BatchStream> = tasks
        .iter()
        .map(|t| BatchStream::new(t.examples.len()))
        .collect();
    let rounds: Vec<_> = (0..50)
        .flat_map(|_| maml_rounds(&tasks, 1, &mut streams, &mut rng))
        .collect();
    let mut a = QuadraticToy::params(5.0);
    let mut opt = infergen::tensor::Adam::new(&a, cfg.lr);
    let mut step = 0;
    let mut ta = Vec::new();
    for r in &rounds {
        maml_epoch(
            &QuadraticToy,
            &mut a,
            &mut opt,
            &tasks,
            std::slice::from_ref(r),
            &maml,
            &cfg,
            &mut step,
        )
        .unwrap();
        ta.push(QuadraticToy::theta(&a).to_bits());
    }
    let mut b = QuadraticToy::params(5.0);
    let mut opt = infergen::tensor::Adam::new(&b, cfg.lr);
    let mut tb = Vec::new();
    for r in &rounds {
        for s in r.supervised_schedule() {
            let (_, g) = QuadraticToy
                .loss_and_grad(&b, &tasks[s.task].batch(&s.ids), None)
                .unwrap();
            opt.step(&mut b, &g).unwrap();
        }
        tb.push(QuadraticToy::theta(&b).to_bits());
    }
    out.push(report(
        "2b",
        "beta=0 equals multi-task",
        rounds.len() == 50 && ta == tb,
        format!(
            "{} rounds, trajectories bit-identical: {}",
            rounds.len(),
            ta == tb
        ),
    ));
    out
}

// 3. Overfitting five examples.
fn overfit() -> Line {
    let start = Instant::now();
    let mut ds = Dataset::new(
        DatasetMode::Generic,
        infergen::text::RelationSet::new(["xIntent"]),
    );
    for (e, t) in [
        ("PersonX makes coffee", "to be awake"),
        ("PersonX drives to work", "to earn money"),
        ("PersonX calls PersonY", "to chat"),
        ("PersonX bakes a cake", "to celebrate"),
        ("PersonX reads a book", "to learn something new"),
    ] {
        ds.push(e, "xIntent", t, None).unwrap();
    }
    let cfg = RunConfig {
        mode: TrainMode::Single,
        word_dim: 32,
        relation_dim: 8,
        hidden: 32,
        dropout: 0.0,
        lr: Some(0.01),
        epochs: 500,
        batch_size: 5,
        ..RunConfig::default()
    };
    let kb = load_knowledge(&cfg).unwrap();
    let run = train(&cfg, &ds, None, &kb, &mut TrainLog::none()).unwrap();
    // One batch per epoch, so epoch n is optimizer step n.
    let first = run
        .history
        .iter()
        .position(|r| r.train_loss < 0.1)
        .map(|i| i + 1);
    let ev = evaluate(&run.bundle, &ds, &kb, &cfg.beam_config()).unwrap();
    let recall = ev.report.micro.recall;
    let secs = start.elapsed().as_secs_f64();
    report(
        "3",
        "overfit five examples",
        first.is_some_and(|s| s <= 500) && recall == 100.0 && secs < 300.0,
        format!("loss < 0.1 at step {first:?}, Recall@10 {recall:.1}%, {secs:.1}s"),
    )
}

// 4. Knowledge and MAML directions on the synthetic corpus.
fn synthetic_study() -> Vec<Line> {
    let start = Instant::now();
    let seeds = [0u64, 1, 2];
    let mut none = Vec::new();
    let mut both = Vec::new();
    let mut single = Vec::new();
    let mut maml = Vec::new();
    for &seed in &seeds {
        let corpus = SyntheticCorpus::generate(&SyntheticConfig {
            seed,
            ..Default::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = corpus.write(dir.path()).unwrap();
        let run = |mode: TrainMode, knowledge: KnowledgeSources| {
            let mut cfg = RunConfig {
                word_dim: 32,
                relation_dim: 8,
                hidden: 32,
                dropout: 0.1,
                lr: Some(5e-3),
                epochs: 60,
                batch_size: 16,
                mode,
                knowledge,
                seed,
                ..RunConfig::default()
            };
            files.apply(&mut cfg);
            let kb = load_knowledge(&cfg).unwrap();
            let out = train(
                &cfg,
                &corpus.train,
                Some(&corpus.dev),
                &kb,
                &mut TrainLog::none(),
            )
            .unwrap();
            let ev = evaluate(&out.bundle, &corpus.test, &kb, &cfg.beam_config()).unwrap();
            ev.report.macro_avg.recall
        };
        none.push(run(TrainMode::Multi, KnowledgeSources::None));
        both.push(run(TrainMode::Multi, KnowledgeSources::Both));
        single.push(run(TrainMode::Single, KnowledgeSources::Both));
        maml.push(run(TrainMode::Maml, KnowledgeSources::Both));
        println!(
            "       seed {seed}: none {:.2}, both {:.2}, single+both {:.2}, maml+both {:.2}",
            none.last().unwrap(),
            both.last().unwrap(),
            single.last().unwrap(),
            maml.last().unwrap()
        );
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    let (n, b, s, m) = (mean(&none), mean(&both), mean(&single), mean(&maml));
    vec![
        report(
            "4a",
            "knowledge gain on synthetic corpus",
            b - n >= 10.0 && secs < 1800.0,
            format!(
                "Recall@10 both {b:.2} vs none {n:.2} (gain {:.2} points, 3 seeds)",
                b - n
            ),
        ),
        report(
            "4b",
            "MAML vs single-task on synthetic corpus",
            m >= s - 1.0 && secs < 1800.0,
            format!("mean Recall@10 maml {m:.2} vs single {s:.2}, study took {secs:.0}s"),
        ),
    ]
}

// 5. Published dataset statistics. Needs the public files.
fn dataset_statistics() -> Vec<Line> {
    let cases = [
        (
            "5a",
            "INFERGEN_EVENT2MIND",
            "event2mind",
            (3, 24_716, 171_291),
        ),
        ("5b", "INFERGEN_ATOMIC", "atomic", (9, 24_313, 877_108)),
    ];
    cases
        .iter()
        .map(|(id, var, mode, want)| {
            let name = format!("{mode} statistics");
            match std::env::var(var) {
                Err(_) => known_failure(
                    id,
                    &name,
                    format!("BLOCKED: dataset not available offline; set {var} to the release directory"),
                ),
                Ok(path) => {
                    let dir = tempfile::tempdir().unwrap();
                    let code = cli::run([
                        "infergen",
                        "stats",
                        "--dataset",
                        mode,
                        "--data",
                        &path,
                        "--out",
                        dir.path().to_str().unwrap(),
                    ]);
                    let got = fs::read_to_string(dir.path().join("stats.json"))
                        .ok()
                        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
                        .map(|v| (v["relations"].as_u64(), v["events"].as_u64(), v["triplets"].as_u64()));
                    let want_v = (Some(want.0), Some(want.1), Some(want.2));
                    report(id, &name, code == 0 && got == Some(want_v), format!("got {got:?}, want {want:?}"))
                }
            }
        })
        .collect()
}

// 6. Metrics against an independent implementation and hand values.
fn metric_oracles() -> Line {
    // (relation, gold, generated), already normalized.
    let fixture: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        (
            "xIntent",
            vec!["be awake", "get energy"],
            vec!["be awake", "relax", "get energy", "sleep"],
        ),
        (
            "xIntent",
            vec!["be helpful"],
            vec!["be very helpful", "be nice", "help"],
        ),
        (
            "xIntent",
            vec!["earn money", "support family"],
            vec!["have fun", "earn some money"],
        ),
        (
            "xIntent",
            vec!["learn"],
            vec!["learn", "learn more", "read", "study", "learn", "know"],
        ),
        ("xReact", vec!["happy", "satisfied"], vec!["happy"]),
        ("xReact", vec!["tired"], vec!["sad", "bored", "angry"]),
        (
            "xReact",
            vec!["proud", "accomplished", "good"],
            vec!["good", "proud of himself", "accomplished", "proud"],
        ),
        (
            "oReact",
            vec!["grateful"],
            vec![
                "thankful", "grateful", "happy", "glad", "pleased", "relieved",
            ],
        ),
        (
            "oReact",
            vec!["annoyed", "upset"],
            vec!["upset", "annoyed", "angry"],
        ),
        ("oReact", vec![], vec!["nothing"]),
    ];
    let records: Vec<EvalRecord> = fixture
        .iter()
        .enumerate()
        .map(|(i, (rel, gold, gen))| {
            EvalRecord::new(
                &format!("event {i}"),
                rel,
                gold.iter().copied(),
                gen.iter().copied(),
            )
        })
        .collect();

    let mut worst = 0.0f64;
    for k in [1usize, 3, 10] {
        let lib_r = recall_at_k(&records, k);
        let lib_b = bleu2_at_k(&records, k);
        let (bf_r, bf_b) = brute_force_metrics(&fixture, k);
        for (rel, v) in &bf_r {
            worst = worst.max((lib_r[rel] - v).abs());
        }
        for (rel, v) in &bf_b {
            worst = worst.max((lib_b[rel] - v).abs());
        }
        if lib_r.len() != bf_r.len() || lib_b.len() != bf_b.len() {
            worst = f64::INFINITY;
        }
    }
    // Hand values. "be very helpful" against "be helpful": p1 = 2/3,
    // p2 = (0 + 1)/(2 + 1), no brevity penalty, so sqrt(2/9).
    let hand =
        infergen::metrics::sentence_bleu2(&["be", "very", "helpful"], &[vec!["be", "helpful"]]);
    worst = worst.max((hand - (2.0f64 / 9.0).sqrt()).abs());
    // "be helpful" against "be very helpful": p1 = 1, p2 = 1/2, BP = e^(-1/2).
    let hand =
        infergen::metrics::sentence_bleu2(&["be", "helpful"], &[vec!["be", "very", "helpful"]]);
    worst = worst.max((hand - 0.4288819424803534).abs());
    // The xIntent Recall@3: (2/2 + 1/1·0 + 0 + 1) / 4 with "be helpful"
    // absent from the top 3 of record 2.
    let r3 = recall_at_k(&records, 3)["xIntent"];
    worst = worst.max((r3 - 100.0 * (1.0 + 0.0 + 0.0 + 1.0) / 4.0).abs());
    report(
        "6",
        "metric oracles",
        worst <= 1e-9,
        format!("10 records, k in {{1, 3, 10}}, largest deviation {worst:.1e}"),
    )
}

fn ngrams(tokens: &[&str], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n)
        .map(|i| tokens[i..i + n].iter().map(|s| s.to_string()).collect())
        .collect()
}

/// Independent Recall@k and BLEU-2@k, percent per relation.
fn brute_force_metrics(
    fixture: &[(&str, Vec<&str>, Vec<&str>)],
    k: usize,
) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let mut r_sum: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut b_sum: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (rel, gold, gen) in fixture {
        let gold: BTreeSet<&str> = gold.iter().copied().collect();
        if gold.is_empty() {
            continue;
        }
        let mut top: Vec<&str> = Vec::new();
        for g in gen {
            if !top.contains(g) {
                top.push(g);
            }
        }
        top.truncate(k);
        let found = gold.iter().filter(|g| top.contains(g)).count();
        let e = r_sum.entry(rel.to_string()).or_default();
        e.0 += found as f64 / gold.len() as f64;
        e.1 += 1;

        let refs: Vec<Vec<&str>> = gold.iter().map(|g| g.split(' ').collect()).collect();
        let mut total = 0.0;
        for cand in &top {
            let c: Vec<&str> = cand.split(' ').collect();
            let mut prec = [0.0; 2];
            for n in 1..=2 {
                let cg = ngrams(&c, n);
                let mut matched = 0usize;
                let mut seen: Vec<&Vec<String>> = Vec::new();
                for g in &cg {
                    if seen.contains(&g) {
                        continue;
                    }
                    seen.push(g);
                    let in_cand = cg.iter().filter(|x| *x == g).count();
                    let in_ref = refs
                        .iter()
                        .map(|r| ngrams(r, n).iter().filter(|x| *x == g).count())
                        .max()
                        .unwrap();
                    matched += in_cand.min(in_ref);
                }
                prec[n - 1] = if n == 1 {
                    matched as f64 / cg.len() as f64
                } else {
                    (matched as f64 + 1.0) / (cg.len() as f64 + 1.0)
                };
            }
            let clen = c.len() as f64;
            let r = refs
                .iter()
                .map(|r| r.len() as f64)
                .min_by(|a, b| {
                    (a - clen)
                        .abs()
                        .total_cmp(&(b - clen).abs())
                        .then(a.total_cmp(b))
                })
                .unwrap();
            let bp = if clen > r {
                1.0
            } else {
                (1.0 - r / clen).exp()
            };
            total += if prec[0] == 0.0 {
                0.0
            } else {
                bp * (prec[0] * prec[1]).sqrt()
            };
        }
        let e = b_sum.entry(rel.to_string()).or_default();
        e.0 += if top.is_empty() {
            0.0
        } else {
            total / top.len() as f64
        };
        e.1 += 1;
    }
    let pct = |m: BTreeMap<String, (f64, usize)>| {
        m.into_iter()
            .map(|(k, (s, n))| (k, 100.0 * s / n as f64))
            .collect()
    };
    (pct(r_sum), pct(b_sum))
}

// 7. Coverage against an exhaustive count, and monotonicity.
fn coverage_methodology() -> Vec<Line> {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let verbs = ["cleans", "paints", "sells", "hides", "builds"];
    let objects = [
        "hammer", "pizza", "jacket", "truck", "novel", "lamp", "kettle", "drum",
    ];
    let words = [
        "tidy", "proud", "money", "happy", "garage", "kitchen", "music", "warm", "fast", "tired",
        "secret", "gift",
    ];
    let relations = ["xIntent", "xReact", "xAttr"];
    let lexicon = Lexicon::default();
    let phrases = KeyPhraseTable::default();

    let mut ds = Dataset::new(
        DatasetMode::Generic,
        infergen::text::RelationSet::new(relations),
    );
    while ds.len() < 100 {
        let event = format!(
            "PersonX {} the {}",
            verbs[rng.gen_range(0..verbs.len())],
            objects[rng.gen_range(0..objects.len())]
        );
        let rel = relations[rng.gen_range(0..relations.len())];
        let target = format!("to be {}", words[rng.gen_range(0..words.len())]);
        ds.push(&event, rel, &target, None).unwrap();
    }
    let mut triples = String::new();
    for obj in objects {
        for _ in 0..2 {
            triples.push_str(&format!(
                "{obj}\tRelatedTo\t{}\t1.0\n",
                words[rng.gen_range(0..words.len())]
            ));
        }
    }
    let mut snippets = String::new();
    let events: BTreeSet<String> = ds.examples.iter().map(|e| e.event.clone()).collect();
    for ev in &events {
        for rel in relations {
            if rng.gen_bool(0.5) {
                let q = &build_queries(&tokenize(ev), rel, &phrases, &lexicon).unwrap()[0];
                let text = format!(
                    "the {} and {}",
                    words[rng.gen_range(0..words.len())],
                    words[rng.gen_range(0..words.len())]
                );
                let line = serde_json::json!({"event": ev, "query": q, "rank": 1, "text": text});
                // Queries shared between relations would repeat a rank.
                if !snippets
                    .contains(&line.to_string()[..line.to_string().find("\"rank\"").unwrap()])
                {
                    snippets.push_str(&format!("{line}\n"));
                }
            }
        }
    }
    let data = dir.path().join("data.tsv");
    write_tsv(&data, &ds).unwrap();
    fs::write(dir.path().join("triples.tsv"), &triples).unwrap();
    fs::write(dir.path().join("snippets.jsonl"), &snippets).unwrap();
    let out = dir.path().join("out");
    let code = cli::run([
        "infergen",
        "coverage",
        "--data",
        data.to_str().unwrap(),
        "--triples",
        dir.path().join("triples.tsv").to_str().unwrap(),
        "--snippets",
        dir.path().join("snippets.jsonl").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let reports: BTreeMap<String, CoverageReport> = fs::read_to_string(out.join("coverage.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();

    // Exhaustive count: every triple and snippet is checked against every
    // group, with no index and no ranking.
    let snippet_rows: Vec<serde_json::Value> = snippets
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let triple_rows: Vec<Vec<&str>> = triples.lines().map(|l| l.split('\t').collect()).collect();
    let mut mismatches = Vec::new();
    let mut all_items: Vec<CoverageItem> = Vec::new();
    for source in ["conceptnet", "web", "both"] {
        let mut hits: BTreeMap<String, usize> = BTreeMap::new();
        for (event, rel, gold) in ds.grouped_targets() {
            let rel = ds.relations.name(rel).to_string();
            let ev_tokens = tokenize(&event);
            let content: Vec<&String> = ev_tokens
                .iter()
                .filter(|t| !lexicon.is_stopword(t) && !is_punctuation(t) && !is_placeholder(t))
                .collect();
            let mut values: Vec<Vec<String>> = Vec::new();
            if source != "web" {
                for t in &triple_rows {
                    let bag: Vec<String> =
                        tokenize(t[0]).into_iter().chain(tokenize(t[2])).collect();
                    if content.iter().any(|c| bag.contains(c)) {
                        values.push(tokenize(t[2]));
                    }
                }
            }
            if source != "conceptnet" {
                let queries = build_queries(&ev_tokens, &rel, &phrases, &lexicon).unwrap();
                for s in &snippet_rows {
                    if s["event"] == event.as_str()
                        && queries.iter().any(|q| s["query"] == q.as_str())
                    {
                        let mut v =
                            filter_content_words(&tokenize(s["text"].as_str().unwrap()), &lexicon);
                        v.truncate(SNIPPET_VALUE_LIMIT);
                        values.push(v);
                    }
                }
            }
            let hit = gold.iter().any(|g| {
                tokenize(g).iter().any(|t| {
                    !lexicon.is_stopword(t)
                        && !is_punctuation(t)
                        && values.iter().any(|v| v.contains(t))
                })
            });
            *hits.entry(rel.clone()).or_default() += usize::from(hit);
            if source == "both" {
                all_items.push(CoverageItem {
                    relation: rel,
                    gold,
                    entries: values
                        .into_iter()
                        .map(|v| KnowledgeEntry {
                            key: vec!["k".into()],
                            value: v,
                            source: Source::Web,
                            score: 0.0,
                        })
                        .collect(),
                });
            }
        }
        for (rel, h) in &hits {
            let got = reports
                .get(source)
                .and_then(|r| r.per_relation.get(rel))
                .map(|c| c.hits);
            if got != Some(*h) {
                mismatches.push(format!("{source}/{rel}: cli {got:?} vs exhaustive {h}"));
            }
        }
    }
    let summary: Vec<String> = reports
        .iter()
        .map(|(s, r)| {
            let hits: usize = r.per_relation.values().map(|c| c.hits).sum();
            format!("{s} {hits}/{}", r.examples)
        })
        .collect();
    let first = report(
        "7a",
        "coverage matches exhaustive count",
        code == 0 && mismatches.is_empty() && reports.len() == 3,
        if mismatches.is_empty() {
            format!("100 examples, hits {}", summary.join(", "))
        } else {
            mismatches.join("; ")
        },
    );

    // Monotonicity: adding entries never lowers any relation's hit count.
    let base = coverage(&all_items, &lexicon);
    let vocab: Vec<String> = words
        .iter()
        .chain(&objects)
        .map(|s| s.to_string())
        .collect();
    let mut runner = TestRunner::new(PtConfig {
        cases: 100,
        ..PtConfig::default()
    });
    let strategy = proptest::collection::vec(
        (
            0..all_items.len(),
            proptest::collection::vec(0..vocab.len(), 1..4),
        ),
        1..20,
    );
    let result = runner.run(&strategy, |additions| {
        let mut items = all_items.clone();
        for (i, toks) in additions {
            items[i].entries.push(KnowledgeEntry {
                key: vec!["extra".into()],
                value: toks.iter().map(|&t| vocab[t].clone()).collect(),
                source: Source::ConceptNet,
                score: 1.0,
            });
        }
        let after = coverage(&items, &lexicon);
        for (rel, rc) in &base.per_relation {
            prop_assert!(after.per_relation[rel].hits >= rc.hits);
        }
        Ok(())
    });
    let second = report(
        "7b",
        "coverage monotone under added entries",
        result.is_ok(),
        match &result {
            Ok(()) => "100 random augmentations".to_string(),
            Err(e) => e.to_string(),
        },
    );
    vec![first, second]
}

// 8. Identical outputs from identical commands.
fn determinism() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let corpus = SyntheticCorpus::generate(&SyntheticConfig {
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    let files = corpus.write(&dir.path().join("data")).unwrap();
    let cfg_path = dir.path().join("run.cfg");
    fs::write(
        &cfg_path,
        format!(
            "train = {}\ndev = {}\ntest = {}\ntriples = {}\nsnippets = {}\nknowledge = both\nmode = maml\n\
             word_dim = 8\nrelation_dim = 4\nhidden = 8\nepochs = 2\nbatch_size = 16\nlr = 0.005\nseed = 11\n\
             beam_width = 4\nmax_len = 6\n",
            files.train.display(),
            files.dev.display(),
            files.test.display(),
            files.triples.display(),
            files.snippets.display()
        ),
    )
    .unwrap();
    let run_all = |tag: &str| -> Vec<(String, Vec<u8>)> {
        let out = dir.path().join(tag);
        let o = out.to_str().unwrap().to_string();
        let c = cfg_path.to_str().unwrap().to_string();
        let model = out.join(cli::MODEL_FILE).to_str().unwrap().to_string();
        let eval_out = format!("{o}/eval");
        let cmds: Vec<Vec<&str>> = vec![
            vec!["infergen", "train", "--config", &c, "--out", &o],
            vec![
                "infergen", "evaluate", "--model", &model, "--config", &c, "--out", &eval_out,
            ],
            vec![
                "infergen", "ablate", "--config", &c, "--counts", "0,2", "--mode", "multi",
                "--epochs", "1", "--out", &o,
            ],
        ];
        for cmd in cmds {
            assert_eq!(cli::run(cmd.clone()), 0, "{cmd:?}");
        }
        [
            "model.json",
            "eval/report.json",
            "eval/predictions.jsonl",
            "ablation.tsv",
            "config.resolved",
        ]
        .iter()
        .map(|f| (f.to_string(), fs::read(Path::new(&o).join(f)).unwrap()))
        .collect()
    };
    let a = run_all("a");
    let b = run_all("b");
    let differing: Vec<&String> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.1 != y.1 && x.0 != "config.resolved")
        .map(|(x, _)| &x.0)
        .collect();
    report(
        "8",
        "determinism",
        differing.is_empty(),
        if differing.is_empty() {
            "train (maml, dropout on), evaluate and ablate outputs byte-identical across two runs"
                .into()
        } else {
            format!("differing outputs: {differing:?}")
        },
    )
}
