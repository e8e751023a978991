use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EncodedExample, Network};
use crate::error::{Error, Result};
use crate::tensor::{ParamSet, Tape, Var};
use crate::text::{BOS_ID, EOS_ID, PAD_ID};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub width: usize,
    pub max_len: usize,
    /// Number of hypotheses returned.
    pub top_k: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            width: 10,
            max_len: 20,
            top_k: 10,
        }
    }
}

/// A decoded sequence. `tokens` excludes EOS; `score` is `log_prob`
/// divided by the number of decoding steps (EOS included when emitted).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub score: f64,
}

struct Live {
    tokens: Vec<usize>,
    log_prob: f64,
    state: Var,
}

/// Log-probabilities with PAD and BOS excluded from generation.
fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let allowed = |i: usize| i != PAD_ID && i != BOS_ID;
    let max = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + logits
            .iter()
            .enumerate()
            .filter(|(i, _)| allowed(*i))
            .map(|(_, v)| (v - max).exp())
            .sum::<f64>()
            .ln();
    logits
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if allowed(i) {
                v - lse
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Indices of the `n` largest finite entries, ties to the lower index.
fn top_n(xs: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).filter(|&i| xs[i].is_finite()).collect();
    idx.sort_by(|&a, &b| xs[b].total_cmp(&xs[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

fn finish(tokens: Vec<usize>, log_prob: f64, steps: usize) -> Hypothesis {
    Hypothesis {
        tokens,
        log_prob,
        score: log_prob / steps.max(1) as f64,
    }
}

impl Network {
    /// Beam search. Each step expands every live hypothesis by its `width`
    /// best tokens and keeps the `width` best extensions by total
    /// log-probability; extensions ending in EOS leave the beam. Results
    /// are deduplicated by token sequence and sorted by normalized score.
    pub fn beam_search(
        &self,
        params: &ParamSet,
        ex: &EncodedExample,
        cfg: &BeamConfig,
    ) -> Result<Vec<Hypothesis>> {
        if cfg.width == 0 || cfg.max_len == 0 {
            return Err(Error::config(
                "beam",
                "width and max_len must be at least 1",
            ));
        }
        let mut tape = Tape::inference();
        let b = self.bind(&mut tape, params);
        let enc = b.encode(&mut tape, &ex.source, ex.relation, None)?;
        let s0 = b.initial_state(&mut tape, &enc, &ex.memory)?;
        let mut live = vec![Live {
            tokens: Vec::new(),
            log_prob: 0.0,
            state: s0,
        }];
        let mut done: Vec<Hypothesis> = Vec::new();

        for _ in 0..cfg.max_len {
            let mut cands: Vec<(usize, usize, f64, Var)> = Vec::new();
            for (pi, hyp) in live.iter().enumerate() {
                let prev = hyp.tokens.last().copied().unwrap_or(BOS_ID);
                let step = b.decode_step(&mut tape, hyp.state, prev, &enc)?;
                let lp = log_softmax(tape.value(step.logits));
                for tok in top_n(&lp, cfg.width) {
                    cands.push((pi, tok, hyp.log_prob + lp[tok], step.state));
                }
            }
            cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
            cands.truncate(cfg.width);
            let mut next = Vec::with_capacity(cands.len());
            for (pi, tok, log_prob, state) in cands {
                let mut tokens = live[pi].tokens.clone();
                if tok == EOS_ID {
                    let steps = tokens.len() + 1;
                    done.push(finish(tokens, log_prob, steps));
                } else {
                    tokens.push(tok);
                    next.push(Live {
                        tokens,
                        log_prob,
                        state,
                    });
                }
            }
            live = next;
            if live.is_empty() {
                break;
            }
        }
        for hyp in live {
            let steps = hyp.tokens.len();
            done.push(finish(hyp.tokens, hyp.log_prob, steps));
        }
        Ok(rank(done, cfg.top_k))
    }

    /// Argmax decoding until EOS or `max_len` steps.
    pub fn greedy_decode(
        &self,
        params: &ParamSet,
        ex: &EncodedExample,
        max_len: usize,
    ) -> Result<Hypothesis> {
        let mut tape = Tape::inference();
        let b = self.bind(&mut tape, params);
        let enc = b.encode(&mut tape, &ex.source, ex.relation, None)?;
        let mut s = b.initial_state(&mut tape, &enc, &ex.memory)?;
        let mut tokens = Vec::new();
        let mut log_prob = 0.0;
        for _ in 0..max_len {
            let prev = tokens.last().copied().unwrap_or(BOS_ID);
            let step = b.decode_step(&mut tape, s, prev, &enc)?;
            let lp = log_softmax(tape.value(step.logits));
            let tok = top_n(&lp, 1)[0];
            log_prob += lp[tok];
            s = step.state;
            if tok == EOS_ID {
                let steps = tokens.len() + 1;
                return Ok(finish(tokens, log_prob, steps));
            }
            tokens.push(tok);
        }
        let steps = tokens.len();
        Ok(finish(tokens, log_prob, steps))
    }
}

fn order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Keeps the best-scoring copy of each token sequence, sorted, first `k`.
pub(crate) fn rank(hyps: Vec<Hypothesis>, k: usize) -> Vec<Hypothesis> {
    let mut best: HashMap<Vec<usize>, Hypothesis> = HashMap::new();
    for h in hyps {
        match best.get(&h.tokens) {
            Some(prev) if order(prev, &h) != Ordering::Greater => {}
            _ => {
                best.insert(h.tokens.clone(), h);
            }
        }
    }
    let mut out: Vec<Hypothesis> = best.into_values().collect();
    out.sort_by(order);
    out.truncate(k);
    out
}
