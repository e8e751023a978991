//! Generates the synthetic corpus and drives the command line through
//! train, generate, evaluate, coverage and stats.
//!
//! cargo run --release --example end_to_end [workdir]

use std::path::PathBuf;

use infergen::cli;
use infergen::synthetic::{SyntheticConfig, SyntheticCorpus};

fn main() -> infergen::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("infergen-end-to-end"));
    let corpus = SyntheticCorpus::generate(&SyntheticConfig::default())?;
    let files = corpus.write(&dir.join("data"))?;
    let p = |p: &PathBuf| p.to_str().unwrap().to_string();
    let out = p(&dir.join("run"));
    let model = p(&dir.join("run").join(cli::MODEL_FILE));

    let commands: Vec<Vec<String>> = vec![
        vec![
            "train",
            "--train",
            &p(&files.train),
            "--dev",
            &p(&files.dev),
            "--test",
            &p(&files.test),
            "--triples",
            &p(&files.triples),
            "--snippets",
            &p(&files.snippets),
            "--knowledge",
            "both",
            "--mode",
            "maml",
            "--word-dim",
            "16",
            "--relation-dim",
            "4",
            "--hidden",
            "16",
            "--epochs",
            "3",
            "--batch-size",
            "16",
            "--lr",
            "0.005",
            "--out",
            &out,
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        [
            "generate",
            "--model",
            &model,
            "--event",
            "PersonX paints the lamp",
            "--top-k",
            "3",
            "--out",
            &out,
        ]
        .map(String::from)
        .to_vec(),
        ["evaluate", "--model", &model, "--out", &out]
            .map(String::from)
            .to_vec(),
        [
            "coverage",
            "--data",
            &p(&files.test),
            "--triples",
            &p(&files.triples),
            "--snippets",
            &p(&files.snippets),
            "--out",
            &out,
        ]
        .map(String::from)
        .to_vec(),
        ["stats", "--data", &p(&files.train), "--out", &out]
            .map(String::from)
            .to_vec(),
    ];
    for args in commands {
        println!("\n$ infergen {}", args.join(" "));
        let code = cli::run(std::iter::once("infergen".to_string()).chain(args));
        if code != cli::EXIT_OK {
            std::process::exit(code);
        }
    }
    println!("\noutputs in {}", dir.join("run").display());
    Ok(())
}
