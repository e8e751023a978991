//! The `infergen` command line.
//!
//! Every subcommand accepts `--config FILE` and one `--<key> VALUE` flag per
//! configuration key (underscores written as dashes). Outputs go to the
//! `out` directory together with the resolved configuration.
//!
//! Exit status: 0 on success, 1 for usage errors (bad flags or settings),
//! 2 for data errors (unreadable, malformed or unsuitable input).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::config::{RunConfig, KEYS, RESOLVED_CONFIG};
use crate::error::{Error, Result};
use crate::experiment::{self, Generator, ModelBundle};
use crate::knowledge::KnowledgeSources;
use crate::text::load_dataset;
use crate::trainer::TrainLog;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

pub const MODEL_FILE: &str = "model.json";
pub const LOG_FILE: &str = "train_log.jsonl";

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

fn with_config_args(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("key = value settings; flags override them"),
    );
    KEYS.iter().fold(cmd, |cmd, (key, help)| {
        cmd.arg(
            Arg::new(*key)
                .long(flag(key))
                .value_name("VALUE")
                .help(*help)
                .help_heading("Settings"),
        )
    })
}

fn model_arg() -> Arg {
    Arg::new("model")
        .long("model")
        .value_name("FILE")
        .required(true)
        .help("model file written by `train`")
}

pub fn command() -> Command {
    Command::new("infergen")
        .about("Knowledge-grounded inferential text generation")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_config_args(
            Command::new("train").about("Train a model; writes model.json and train_log.jsonl to --out"),
        ))
        .subcommand(with_config_args(
            Command::new("generate")
                .about("Generate inferences for events")
                .arg(model_arg())
                .arg(Arg::new("event").long("event").value_name("TEXT").help("event phrase"))
                .arg(
                    Arg::new("relation")
                        .long("relation")
                        .value_name("NAME")
                        .help("relation to generate for"),
                )
                .arg(
                    Arg::new("input")
                        .long("input")
                        .value_name("FILE")
                        .conflicts_with("event")
                        .help("TSV of event<TAB>relation lines"),
                ),
        ))
        .subcommand(with_config_args(
            Command::new("evaluate")
                .about("Recall@k and BLEU-2@k on --test; writes report.json and predictions.jsonl")
                .arg(model_arg()),
        ))
        .subcommand(with_config_args(
            Command::new("coverage")
                .about("Share of gold targets found in the retrieved knowledge, per relation and source")
                .arg(
                    Arg::new("data")
                        .long("data")
                        .value_name("PATH")
                        .required(true)
                        .help("dataset file or directory"),
                ),
        ))
        .subcommand(with_config_args(
            Command::new("stats")
                .about("Relation, event and triplet counts of a dataset")
                .arg(
                    Arg::new("data")
                        .long("data")
                        .value_name("PATH")
                        .required(true)
                        .help("dataset file or directory"),
                ),
        ))
        .subcommand(with_config_args(
            Command::new("ablate")
                .about("Train and evaluate once per snippet count; writes ablation.tsv")
                .arg(
                    Arg::new("counts")
                        .long("counts")
                        .value_name("N,N,...")
                        .required(true)
                        .value_delimiter(',')
                        .action(ArgAction::Append)
                        .help("snippets per event to try"),
                ),
        ))
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&matches) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    }
}

fn dispatch(matches: &ArgMatches) -> Result<()> {
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    match name {
        "train" => cmd_train(&resolve(sub, None)?),
        "generate" => cmd_generate(sub),
        "evaluate" => cmd_evaluate(sub),
        "coverage" => cmd_coverage(sub),
        "stats" => cmd_stats(sub),
        "ablate" => cmd_ablate(sub),
        _ => unreachable!("clap rejects unknown subcommands"),
    }
}

/// Defaults, then `base` (the config stored beside a model), then
/// `--config`, then flags.
fn resolve(sub: &ArgMatches, base: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(b) = base.filter(|b| b.exists()) {
        cfg.apply_file(b)?;
    }
    if let Some(f) = sub.get_one::<String>("config") {
        cfg.apply_file(Path::new(f))?;
    }
    for (key, _) in KEYS {
        if let Some(v) = sub.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn model_path(sub: &ArgMatches) -> PathBuf {
    PathBuf::from(sub.get_one::<String>("model").expect("required"))
}

fn stored_config(model: &Path) -> PathBuf {
    model
        .parent()
        .unwrap_or(Path::new("."))
        .join(RESOLVED_CONFIG)
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let train_path = cfg.require("train", &cfg.train)?;
    let train = load_dataset(train_path, cfg.dataset)?;
    let dev = match &cfg.dev {
        Some(p) => Some(load_dataset(p, cfg.dataset)?),
        None => None,
    };
    let kb = experiment::load_knowledge(cfg)?;
    cfg.write_resolved(&cfg.out)?;
    let mut log = TrainLog::create(&cfg.out.join(LOG_FILE))?;
    let run = experiment::train(cfg, &train, dev.as_ref(), &kb, &mut log)?;
    let model = cfg.out.join(MODEL_FILE);
    run.bundle.save(&model)?;
    let last = run.history.last();
    println!(
        "{}",
        serde_json::json!({
            "model": model.display().to_string(),
            "mode": cfg.mode.to_string(),
            "relations": run.bundle.relations(),
            "epochs": cfg.epochs,
            "final_train_loss": last.map(|r| r.train_loss),
            "final_dev_loss": last.map(|r| &r.dev_loss),
        })
    );
    Ok(())
}

fn cmd_generate(sub: &ArgMatches) -> Result<()> {
    let model = model_path(sub);
    let cfg = resolve(sub, Some(&stored_config(&model)))?;
    let bundle = ModelBundle::load(&model)?;
    let kb = experiment::load_knowledge(&cfg)?;
    let requests: Vec<(String, String)> = match (
        sub.get_one::<String>("input"),
        sub.get_one::<String>("event"),
    ) {
        (Some(input), _) => read_requests(Path::new(input))?,
        (None, Some(event)) => {
            let rels: Vec<String> = match sub.get_one::<String>("relation") {
                Some(r) => vec![r.clone()],
                None => bundle.relations().into_iter().map(String::from).collect(),
            };
            rels.into_iter().map(|r| (event.clone(), r)).collect()
        }
        (None, None) => return Err(Error::config("event", "give --event or --input")),
    };
    let generator = Generator::new(&bundle)?;
    let mut out = String::from("event\trelation\trank\ttext\tscore\n");
    for (event, relation) in &requests {
        for (i, g) in generator
            .generate(&kb, event, relation, &cfg.beam_config())?
            .iter()
            .enumerate()
        {
            out.push_str(&format!(
                "{event}\t{relation}\t{}\t{}\t{:.6}\n",
                i + 1,
                g.text,
                g.score
            ));
        }
    }
    cfg.write_resolved(&cfg.out)?;
    write_output(&cfg.out.join("generations.tsv"), &out)?;
    print!("{out}");
    Ok(())
}

fn read_requests(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (event, relation) = line.split_once('\t').ok_or_else(|| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            reason: "expected event<TAB>relation".into(),
        })?;
        out.push((event.trim().to_string(), relation.trim().to_string()));
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no requests",
            path.display()
        )));
    }
    Ok(out)
}

fn cmd_evaluate(sub: &ArgMatches) -> Result<()> {
    let model = model_path(sub);
    let cfg = resolve(sub, Some(&stored_config(&model)))?;
    let test = load_dataset(cfg.require("test", &cfg.test)?, cfg.dataset)?;
    let bundle = ModelBundle::load(&model)?;
    let kb = experiment::load_knowledge(&cfg)?;
    let ev = experiment::evaluate(&bundle, &test, &kb, &cfg.beam_config())?;
    cfg.write_resolved(&cfg.out)?;
    let report = to_json(&ev.report);
    write_output(&cfg.out.join("report.json"), &report)?;
    let preds: String = ev
        .predictions
        .iter()
        .map(|p| serde_json::to_string(p).expect("predictions serialize") + "\n")
        .collect();
    write_output(&cfg.out.join("predictions.jsonl"), &preds)?;
    print!("{report}");
    Ok(())
}

fn cmd_coverage(sub: &ArgMatches) -> Result<()> {
    let mut cfg = resolve(sub, None)?;
    cfg.knowledge = match (cfg.triples.is_some(), cfg.snippets.is_some()) {
        (true, true) => KnowledgeSources::Both,
        (true, false) => KnowledgeSources::ConceptNet,
        (false, true) => KnowledgeSources::Web,
        (false, false) => {
            return Err(Error::config(
                "triples",
                "coverage needs --triples or --snippets",
            ))
        }
    };
    let data = load_dataset(
        Path::new(sub.get_one::<String>("data").expect("required")),
        cfg.dataset,
    )?;
    let kb = experiment::load_knowledge(&cfg)?;
    let report = to_json(&experiment::coverage_by_source(&kb, &data)?);
    cfg.write_resolved(&cfg.out)?;
    write_output(&cfg.out.join("coverage.json"), &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_stats(sub: &ArgMatches) -> Result<()> {
    let cfg = resolve(sub, None)?;
    let data = load_dataset(
        Path::new(sub.get_one::<String>("data").expect("required")),
        cfg.dataset,
    )?;
    let report = to_json(&data.stats());
    cfg.write_resolved(&cfg.out)?;
    write_output(&cfg.out.join("stats.json"), &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_ablate(sub: &ArgMatches) -> Result<()> {
    let cfg = resolve(sub, None)?;
    let counts = sub
        .get_many::<String>("counts")
        .expect("required")
        .map(|c| {
            c.trim()
                .parse::<usize>()
                .map_err(|_| Error::config("counts", format!("not a count: {c:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let train = load_dataset(cfg.require("train", &cfg.train)?, cfg.dataset)?;
    let dev = match &cfg.dev {
        Some(p) => Some(load_dataset(p, cfg.dataset)?),
        None => None,
    };
    let test = load_dataset(cfg.require("test", &cfg.test)?, cfg.dataset)?;
    let kb = experiment::load_knowledge(&cfg)?;
    let rows = experiment::ablate_snippets(&cfg, &counts, &train, dev.as_ref(), &test, &kb)?;
    let tsv = experiment::ablation_tsv(&rows);
    cfg.write_resolved(&cfg.out)?;
    write_output(&cfg.out.join("ablation.tsv"), &tsv)?;
    print!("{tsv}");
    Ok(())
}
