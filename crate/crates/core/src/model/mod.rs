//! The relation-conditioned encoder-decoder with a key-value knowledge
//! memory.
//!
//! A bidirectional GRU reads the event with the relation embedding appended
//! to every word. The memory is attended with the encoder summary `h_x`,
//! and `[h_x; h_c; h_k]` initializes the decoder. Each decoder step attends
//! over the encoder states with the previous decoder state, then feeds
//! `[c_t; e(y_{t-1}); h_c]` to a GRU and projects to the vocabulary.

mod beam;
mod checkpoint;
mod gru;
mod pretrained;

pub use beam::{BeamConfig, Hypothesis};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use gru::{gru_cell_step, GruVars, GRU_PARTS};
pub use pretrained::load_embeddings;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::KnowledgeEntry;
use crate::tensor::{Gradients, ParamSet, Tape, Tensor, Var};
use crate::text::{EventExample, Vocabulary, BOS_ID, EOS_ID};

use gru::gru_specs;

/// Network sizes and regularization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Word embedding size `d_w`.
    pub word_dim: usize,
    /// Relation embedding size `d_c`.
    pub relation_dim: usize,
    /// Encoder hidden size per direction `d_h`. The decoder uses `2·d_h`.
    pub hidden: usize,
    /// Dropout on encoder word embeddings while training.
    pub dropout: f64,
    /// Parameters start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Also feed `s_{t-1}` as part of the decoder GRU input.
    pub feed_prev_state_as_input: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 100,
            relation_dim: 100,
            hidden: 100,
            dropout: 0.2,
            init_scale: 0.08,
            feed_prev_state_as_input: false,
        }
    }
}

// Parameter positions; fixed by `Network::param_specs`.
const EMBED: usize = 0;
const RELATION: usize = 1;
const ENC_FWD: usize = 2;
const ENC_BWD: usize = ENC_FWD + GRU_PARTS.len();
const DEC: usize = ENC_BWD + GRU_PARTS.len();
const W_A: usize = DEC + GRU_PARTS.len();
const W_K: usize = W_A + 1;
const W_V: usize = W_A + 2;
const W_0: usize = W_A + 3;
const W_O: usize = W_A + 4;
const B_O: usize = W_A + 5;
const NUM_PARAMS: usize = B_O + 1;

/// Parameter shapes are derived from the config, vocabulary size and
/// relation count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub config: ModelConfig,
    pub vocab_size: usize,
    pub num_relations: usize,
}

/// One memory row before embedding: token ids of the key and the value.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryItem {
    pub key: Vec<usize>,
    pub value: Vec<usize>,
}

/// An example in id space, ready for the network.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedExample {
    pub source: Vec<usize>,
    pub relation: usize,
    pub target: Vec<usize>,
    pub memory: Vec<MemoryItem>,
}

/// Output of the encoder on a tape.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    /// `n × 2d_h`, row `i` = `[→h_i; ←h_i]`.
    pub states: Var,
    /// `h_x = [→h_n; ←h_1]`.
    pub summary: Var,
    /// Relation embedding `h_c`.
    pub relation: Var,
}

/// Projected memory rows, `M × 2d_h` each.
#[derive(Clone, Copy, Debug)]
pub struct MemoryBank {
    pub keys: Var,
    pub values: Var,
}

/// One decoder step on a tape.
#[derive(Clone, Copy, Debug)]
pub struct Step {
    pub logits: Var,
    pub state: Var,
    pub attention: Var,
}

/// Zero for biases (last name segment starting with `b_`), uniform otherwise.
pub(crate) fn init_params<R: Rng>(
    specs: &[(String, Vec<usize>)],
    bound: f64,
    rng: &mut R,
) -> ParamSet {
    let mut params = ParamSet::new();
    for (name, shape) in specs {
        let last = name.rsplit('.').next().unwrap_or(name);
        let t = if last.starts_with("b_") {
            Tensor::zeros(shape)
        } else {
            Tensor::uniform(shape, bound, rng)
        };
        params.insert(name.clone(), t);
    }
    params
}

impl Network {
    pub fn new(config: ModelConfig, vocab_size: usize, num_relations: usize) -> Result<Self> {
        let c = &config;
        for (field, v) in [
            ("word_dim", c.word_dim),
            ("relation_dim", c.relation_dim),
            ("hidden", c.hidden),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if !(0.0..1.0).contains(&c.dropout) {
            return Err(Error::config("dropout", "must be in [0, 1)"));
        }
        if vocab_size <= EOS_ID || num_relations == 0 {
            return Err(Error::config(
                "vocabulary",
                "needs the reserved tokens and at least one relation",
            ));
        }
        Ok(Network {
            config,
            vocab_size,
            num_relations,
        })
    }

    /// Decoder state size, `2·d_h`.
    pub fn state_dim(&self) -> usize {
        2 * self.config.hidden
    }

    pub fn param_specs(&self) -> Vec<(String, Vec<usize>)> {
        let c = &self.config;
        let h2 = self.state_dim();
        let enc_in = c.word_dim + c.relation_dim;
        let mut dec_in = h2 + c.word_dim + c.relation_dim;
        if c.feed_prev_state_as_input {
            dec_in += h2;
        }
        let mut specs = vec![
            ("embed".to_string(), vec![self.vocab_size, c.word_dim]),
            (
                "relation".to_string(),
                vec![self.num_relations, c.relation_dim],
            ),
        ];
        specs.extend(gru_specs("enc_fwd", enc_in, c.hidden));
        specs.extend(gru_specs("enc_bwd", enc_in, c.hidden));
        specs.extend(gru_specs("dec", dec_in, h2));
        specs.push(("w_a".into(), vec![h2, h2]));
        specs.push(("w_k".into(), vec![c.word_dim, h2]));
        specs.push(("w_v".into(), vec![c.word_dim, h2]));
        specs.push(("w_0".into(), vec![h2, h2 + c.relation_dim + h2]));
        specs.push(("w_o".into(), vec![self.vocab_size, h2]));
        specs.push(("b_o".into(), vec![self.vocab_size]));
        debug_assert_eq!(specs.len(), NUM_PARAMS);
        specs
    }

    pub fn init_params(&self, seed: u64) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        init_params(&self.param_specs(), self.config.init_scale, &mut rng)
    }

    /// Checks names and shapes of `params` against this architecture.
    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        let specs = self.param_specs();
        if params.len() != specs.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                specs.len(),
                params.len()
            )));
        }
        for (i, (name, shape)) in specs.iter().enumerate() {
            if params.name(i) != name || params.get(i).shape() != shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter {i}: expected {name} {shape:?}, found {} {:?}",
                    params.name(i),
                    params.get(i).shape()
                )));
            }
        }
        if !params.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter values".into()));
        }
        Ok(())
    }

    /// Registers `params` on `tape`.
    pub fn bind<'n>(&'n self, tape: &mut Tape, params: &ParamSet) -> Bound<'n> {
        let vars = tape.bind(params);
        self.bound(&vars)
    }

    /// Wraps handles already on a tape, aligned with [`Network::param_specs`].
    pub fn bound<'n>(&'n self, vars: &[Var]) -> Bound<'n> {
        assert_eq!(vars.len(), NUM_PARAMS, "one handle per parameter");
        Bound {
            net: self,
            embed: vars[EMBED],
            relation: vars[RELATION],
            enc_fwd: GruVars::from_slice(&vars[ENC_FWD..ENC_BWD]),
            enc_bwd: GruVars::from_slice(&vars[ENC_BWD..DEC]),
            dec: GruVars::from_slice(&vars[DEC..W_A]),
            w_a: vars[W_A],
            w_k: vars[W_K],
            w_v: vars[W_V],
            w_0: vars[W_0],
            w_o: vars[W_O],
            b_o: vars[B_O],
        }
    }

    /// Mean teacher-forced loss over `examples`. With `dropout_seed`, the
    /// encoder applies dropout; example `i` draws its mask from stream `i`
    /// of that seed.
    pub fn loss(
        &self,
        params: &ParamSet,
        examples: &[EncodedExample],
        dropout_seed: Option<u64>,
    ) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::EmptyInput("no examples in batch".into()));
        }
        let losses: Vec<f64> = examples
            .par_iter()
            .enumerate()
            .map(|(i, ex)| {
                let mut tape = Tape::inference();
                let b = self.bind(&mut tape, params);
                let mut rng = dropout_rng(dropout_seed, i);
                let l = b.sequence_loss(&mut tape, ex, rng.as_mut())?;
                Ok(tape.scalar(l))
            })
            .collect::<Result<_>>()?;
        Ok(losses.iter().sum::<f64>() / examples.len() as f64)
    }

    /// Mean loss and its gradient. Per-example tapes run in parallel; the
    /// reduction is sequential so results do not depend on thread count.
    pub fn loss_and_grad(
        &self,
        params: &ParamSet,
        examples: &[EncodedExample],
        dropout_seed: Option<u64>,
    ) -> Result<(f64, Gradients)> {
        if examples.is_empty() {
            return Err(Error::EmptyInput("no examples in batch".into()));
        }
        let parts: Vec<(f64, Gradients)> = examples
            .par_iter()
            .enumerate()
            .map(|(i, ex)| {
                let mut tape = Tape::new();
                let b = self.bind(&mut tape, params);
                let mut rng = dropout_rng(dropout_seed, i);
                let l = b.sequence_loss(&mut tape, ex, rng.as_mut())?;
                let value = tape.scalar(l);
                let grads = tape.backward(l)?;
                Ok((value, grads.for_params(params)))
            })
            .collect::<Result<_>>()?;
        let inv = 1.0 / examples.len() as f64;
        let mut total = Gradients::zeros_like(params);
        let mut loss = 0.0;
        for (l, g) in &parts {
            loss += l;
            total.add_scaled(g, inv);
        }
        Ok((loss * inv, total))
    }

    /// Next-token distribution after feeding `prefix` (teacher forced),
    /// for inspection and tests.
    pub fn next_distribution(
        &self,
        params: &ParamSet,
        ex: &EncodedExample,
        prefix: &[usize],
    ) -> Result<Vec<f64>> {
        let mut tape = Tape::inference();
        let b = self.bind(&mut tape, params);
        let enc = b.encode(&mut tape, &ex.source, ex.relation, None)?;
        let mut s = b.initial_state(&mut tape, &enc, &ex.memory)?;
        let mut prev = BOS_ID;
        for &tok in prefix {
            s = b.decode_step(&mut tape, s, prev, &enc)?.state;
            prev = tok;
        }
        let step = b.decode_step(&mut tape, s, prev, &enc)?;
        let probs = tape.softmax(step.logits);
        Ok(tape.value(probs).to_vec())
    }
}

fn dropout_rng(seed: Option<u64>, stream: usize) -> Option<ChaCha8Rng> {
    seed.map(|s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        rng.set_stream(stream as u64);
        rng
    })
}

/// Parameter handles on one tape.
pub struct Bound<'n> {
    pub net: &'n Network,
    pub embed: Var,
    pub relation: Var,
    pub enc_fwd: GruVars,
    pub enc_bwd: GruVars,
    pub dec: GruVars,
    pub w_a: Var,
    pub w_k: Var,
    pub w_v: Var,
    pub w_0: Var,
    pub w_o: Var,
    pub b_o: Var,
}

impl Bound<'_> {
    /// Runs both encoder directions. `rng` switches on embedding dropout.
    pub fn encode(
        &self,
        tape: &mut Tape,
        source: &[usize],
        relation: usize,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Encoded> {
        if source.is_empty() {
            return Err(Error::EmptyInput("event has no tokens".into()));
        }
        let cfg = &self.net.config;
        let mut emb = tape.gather(self.embed, source)?;
        if let Some(rng) = rng {
            emb = tape.dropout(emb, cfg.dropout, rng);
        }
        let h_c = tape.row(self.relation, relation)?;
        let mut inputs = Vec::with_capacity(source.len());
        for i in 0..source.len() {
            let w = tape.row(emb, i)?;
            inputs.push(tape.concat(&[w, h_c])?);
        }
        let zero = tape.zeros(&[cfg.hidden]);
        let mut fwd = Vec::with_capacity(inputs.len());
        let mut h = zero;
        for &x in &inputs {
            h = gru_cell_step(tape, x, h, &self.enc_fwd)?;
            fwd.push(h);
        }
        let mut bwd = vec![zero; inputs.len()];
        let mut h = zero;
        for (i, &x) in inputs.iter().enumerate().rev() {
            h = gru_cell_step(tape, x, h, &self.enc_bwd)?;
            bwd[i] = h;
        }
        let rows: Vec<Var> = fwd
            .iter()
            .zip(&bwd)
            .map(|(&f, &b)| tape.concat(&[f, b]))
            .collect::<Result<_, _>>()?;
        let states = tape.stack_rows(&rows)?;
        let summary = tape.concat(&[fwd[fwd.len() - 1], bwd[0]])?;
        Ok(Encoded {
            states,
            summary,
            relation: h_c,
        })
    }

    /// Embeds and projects memory rows; `None` for an empty memory.
    pub fn memory_bank(&self, tape: &mut Tape, items: &[MemoryItem]) -> Result<Option<MemoryBank>> {
        if items.is_empty() {
            return Ok(None);
        }
        let keys: Vec<Vec<usize>> = items.iter().map(|m| m.key.clone()).collect();
        let values: Vec<Vec<usize>> = items.iter().map(|m| m.value.clone()).collect();
        let k = tape.gather_mean(self.embed, &keys)?;
        let v = tape.gather_mean(self.embed, &values)?;
        Ok(Some(MemoryBank {
            keys: tape.matmul(k, self.w_k)?,
            values: tape.matmul(v, self.w_v)?,
        }))
    }

    /// `α = softmax(K h_x)`, `h_k = Σ α_i V_i`; zero without a memory.
    /// Returns `h_k` and `α`.
    pub fn read_memory(
        &self,
        tape: &mut Tape,
        h_x: Var,
        bank: Option<&MemoryBank>,
    ) -> Result<(Var, Option<Var>)> {
        match bank {
            None => Ok((tape.zeros(&[self.net.state_dim()]), None)),
            Some(bank) => {
                let scores = tape.matmul(bank.keys, h_x)?;
                let alpha = tape.softmax(scores);
                let h_k = tape.matmul(alpha, bank.values)?;
                Ok((h_k, Some(alpha)))
            }
        }
    }

    /// `s_0 = tanh(W_0 [h_x; h_c; h_k])`.
    pub fn init_decoder(&self, tape: &mut Tape, h_x: Var, h_c: Var, h_k: Var) -> Result<Var> {
        let joined = tape.concat(&[h_x, h_c, h_k])?;
        let pre = tape.matmul(self.w_0, joined)?;
        Ok(tape.tanh(pre))
    }

    /// Memory read followed by [`Bound::init_decoder`].
    pub fn initial_state(
        &self,
        tape: &mut Tape,
        enc: &Encoded,
        memory: &[MemoryItem],
    ) -> Result<Var> {
        let bank = self.memory_bank(tape, memory)?;
        let (h_k, _) = self.read_memory(tape, enc.summary, bank.as_ref())?;
        self.init_decoder(tape, enc.summary, enc.relation, h_k)
    }

    pub fn decode_step(
        &self,
        tape: &mut Tape,
        s_prev: Var,
        y_prev: usize,
        enc: &Encoded,
    ) -> Result<Step> {
        let query = tape.matmul(s_prev, self.w_a)?;
        let scores = tape.matmul(enc.states, query)?;
        let attention = tape.softmax(scores);
        let context = tape.matmul(attention, enc.states)?;
        let y = tape.row(self.embed, y_prev)?;
        let input = if self.net.config.feed_prev_state_as_input {
            tape.concat(&[context, y, enc.relation, s_prev])?
        } else {
            tape.concat(&[context, y, enc.relation])?
        };
        let state = gru_cell_step(tape, input, s_prev, &self.dec)?;
        let projected = tape.matmul(self.w_o, state)?;
        let logits = tape.add(projected, self.b_o)?;
        Ok(Step {
            logits,
            state,
            attention,
        })
    }

    /// Mean cross-entropy over `target + [EOS]` with gold tokens fed back.
    pub fn sequence_loss(
        &self,
        tape: &mut Tape,
        ex: &EncodedExample,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        if ex.target.is_empty() {
            return Err(Error::EmptyInput("target has no tokens".into()));
        }
        let enc = self.encode(tape, &ex.source, ex.relation, rng)?;
        let mut s = self.initial_state(tape, &enc, &ex.memory)?;
        let mut prev = BOS_ID;
        let mut losses = Vec::with_capacity(ex.target.len() + 1);
        for &gold in ex.target.iter().chain(std::iter::once(&EOS_ID)) {
            let step = self.decode_step(tape, s, prev, &enc)?;
            losses.push(tape.cross_entropy(step.logits, gold)?);
            s = step.state;
            prev = gold;
        }
        let total = tape.add_n(&losses)?;
        Ok(tape.scale(total, 1.0 / losses.len() as f64))
    }
}

/// Maps text to ids: event and target through the vocabulary (unknown
/// words become UNK), knowledge entries into memory rows.
pub fn encode_example(
    vocab: &Vocabulary,
    relation: usize,
    event_tokens: &[String],
    target_tokens: &[String],
    entries: &[KnowledgeEntry],
) -> EncodedExample {
    EncodedExample {
        source: vocab.encode(event_tokens),
        relation,
        target: vocab.encode(target_tokens),
        memory: entries
            .iter()
            .filter(|e| !e.key.is_empty() && !e.value.is_empty())
            .map(|e| MemoryItem {
                key: vocab.encode(&e.key),
                value: vocab.encode(&e.value),
            })
            .collect(),
    }
}

/// Encodes a dataset example; relation ids are taken as-is.
pub fn encode_event(
    vocab: &Vocabulary,
    ex: &EventExample,
    entries: &[KnowledgeEntry],
) -> EncodedExample {
    encode_example(
        vocab,
        ex.relation.index(),
        &ex.event_tokens,
        &ex.target_tokens,
        entries,
    )
}
