//! Knowledge-grounded inferential text generation.
//!
//! Given an event phrase such as `PersonX makes PersonY's coffee` and a
//! commonsense relation such as `xIntent`, the model generates the inferred
//! text (`to be helpful`). The crate contains every piece of that pipeline:
//!
//! - [`tensor`]: a small `f64` tensor library with a gradient tape and Adam
//! - [`text`]: tokenizer, vocabulary and Event2Mind/ATOMIC readers
//! - [`knowledge`]: triple retrieval, web-snippet queries and memory selection
//! - [`model`]: the relation-conditioned GRU encoder-decoder with a
//!   key-value memory, teacher-forced loss and beam search
//! - [`trainer`]: single-task, multi-task and meta-learned training loops
//! - [`metrics`]: Recall@k and BLEU-2@k
//! - [`config`] and [`experiment`]: reproducible end-to-end runs
//! - [`synthetic`]: a generated corpus with knowledge-only targets
//! - [`cli`]: the `infergen` command line

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod knowledge;
pub mod metrics;
pub mod model;
pub mod synthetic;
pub mod tensor;
pub mod text;
pub mod trainer;

pub use error::{Error, Result};
