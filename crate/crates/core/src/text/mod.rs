//! Tokenization, vocabulary and dataset ingestion.

mod dataset;
mod tokenize;
mod vocab;

pub use dataset::{
    gold_to_dataset, load_dataset, load_gold_jsonl, write_gold_jsonl, write_tsv, Dataset,
    DatasetMode, DatasetStats, EventExample, GoldRecord, RelationId, RelationSet, ATOMIC_RELATIONS,
    EVENT2MIND_RELATIONS,
};
pub use tokenize::{detokenize, extract_ngrams, is_placeholder, is_punctuation, tokenize};
pub use vocab::{
    Vocabulary, BLANK, BOS, BOS_ID, EOS, EOS_ID, PAD, PAD_ID, PERSON_X, PERSON_Y, RESERVED, UNK,
    UNK_ID,
};
