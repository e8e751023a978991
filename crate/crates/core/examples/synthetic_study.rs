//! Trains with and without knowledge on the synthetic corpus and compares
//! Recall@10, once per training mode.
//!
//!     cargo run --release --example synthetic_study -- [seed] [epochs]

use std::time::Instant;

use infergen::config::{RunConfig, TrainMode};
use infergen::experiment::{evaluate, load_knowledge, train};
use infergen::knowledge::KnowledgeSources;
use infergen::metrics::EvalRecord;
use infergen::synthetic::{SyntheticConfig, SyntheticCorpus};
use infergen::trainer::TrainLog;

fn main() -> infergen::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30);
    let corpus = SyntheticCorpus::generate(&SyntheticConfig {
        seed,
        ..Default::default()
    })?;
    let dir = tempfile::tempdir().expect("temp dir");
    let files = corpus.write(dir.path())?;

    for (mode, knowledge) in [
        (TrainMode::Multi, KnowledgeSources::None),
        (TrainMode::Multi, KnowledgeSources::Both),
        (TrainMode::Single, KnowledgeSources::Both),
        (TrainMode::Maml, KnowledgeSources::Both),
    ] {
        let mut cfg = RunConfig {
            word_dim: 32,
            relation_dim: 8,
            hidden: 32,
            dropout: 0.1,
            lr: Some(5e-3),
            epochs,
            batch_size: 16,
            mode,
            knowledge,
            seed,
            ..RunConfig::default()
        };
        files.apply(&mut cfg);
        let kb = load_knowledge(&cfg)?;
        let start = Instant::now();
        let run = train(
            &cfg,
            &corpus.train,
            Some(&corpus.dev),
            &kb,
            &mut TrainLog::none(),
        )?;
        let ev = evaluate(&run.bundle, &corpus.test, &kb, &cfg.beam_config())?;
        let last = run.history.last().unwrap();
        let (mut ph, mut pn, mut rh, mut rn) = (0, 0, 0, 0);
        for p in &ev.predictions {
            let rec = EvalRecord::new(
                &p.event,
                &p.relation,
                p.gold.iter().map(String::as_str),
                p.generated.iter().map(|g| g.text.as_str()),
            );
            let hit = rec.recall(10).unwrap_or(0.0);
            if corpus
                .planted
                .contains(&(p.event.clone(), p.relation.clone()))
            {
                ph += (hit > 0.0) as usize;
                pn += 1;
            } else {
                rh += (hit > 0.0) as usize;
                rn += 1;
            }
        }
        println!("   planted {ph}/{pn}  rule {rh}/{rn}");
        println!(
            "{mode:>6} {knowledge:>10}: recall@10 {:6.2}  macro {:6.2}  bleu {:6.2}  loss {:.3} dev {:?}  {:.1}s",
            ev.report.micro.recall,
            ev.report.macro_avg.recall,
            ev.report.micro.bleu2,
            last.train_loss,
            last.dev_loss,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
