//! Trains the encoder-decoder on a handful of examples and decodes them
//! with beam search.
//!
//! cargo run --release --example seq2seq

use infergen::knowledge::{KnowledgeEntry, Source};
use infergen::model::{encode_example, BeamConfig, ModelConfig, Network};
use infergen::tensor::{Adam, Optimizer};
use infergen::text::{detokenize, tokenize, Vocabulary};

fn main() -> infergen::Result<()> {
    let data = [
        (0, "PersonX makes coffee", "to be awake", "coffee", "awake"),
        (
            0,
            "PersonX goes jogging",
            "to be healthy",
            "jogging",
            "healthy",
        ),
        (1, "PersonX makes coffee", "energized", "coffee", "energy"),
        (1, "PersonX goes jogging", "tired", "jogging", "tired"),
    ];
    let mut seqs: Vec<Vec<String>> = Vec::new();
    for (_, e, t, k, v) in &data {
        seqs.extend([tokenize(e), tokenize(t), tokenize(k), tokenize(v)]);
    }
    let vocab = Vocabulary::build(seqs.iter().map(Vec::as_slice), 1);
    let examples: Vec<_> = data
        .iter()
        .map(|(rel, e, t, k, v)| {
            let memory = [KnowledgeEntry {
                key: tokenize(k),
                value: tokenize(v),
                source: Source::ConceptNet,
                score: 1.0,
            }];
            encode_example(&vocab, *rel, &tokenize(e), &tokenize(t), &memory)
        })
        .collect();

    let cfg = ModelConfig {
        word_dim: 16,
        relation_dim: 4,
        hidden: 16,
        dropout: 0.0,
        ..ModelConfig::default()
    };
    let net = Network::new(cfg, vocab.len(), 2)?;
    let mut params = net.init_params(1);
    let mut opt = Adam::new(&params, 0.02);
    for step in 1..=150 {
        let (loss, grads) = net.loss_and_grad(&params, &examples, None)?;
        opt.step(&mut params, &grads)?;
        if step % 30 == 0 {
            println!("step {step:3}  loss {loss:.4}");
        }
    }

    let beam = BeamConfig {
        width: 4,
        max_len: 6,
        top_k: 3,
    };
    for ((rel, event, gold, _, _), ex) in data.iter().zip(&examples) {
        let hyps = net.beam_search(&params, ex, &beam)?;
        let shown: Vec<String> = hyps
            .iter()
            .map(|h| format!("{} ({:.2})", detokenize(&vocab.decode(&h.tokens)), h.score))
            .collect();
        println!(
            "{event} / relation {rel} (gold: {gold}): {}",
            shown.join(", ")
        );
    }
    Ok(())
}
