//! Tokenization, n-grams and vocabulary round trips.
//!
//! cargo run --example tokenize

use infergen::text::{detokenize, extract_ngrams, tokenize, Vocabulary};

fn main() {
    let events = [
        "PersonX makes PersonY's coffee",
        "PersonX drives to work on ___",
        "PersonX can't find the keys!",
    ];
    let tokenized: Vec<Vec<String>> = events.iter().map(|e| tokenize(e)).collect();
    for (e, t) in events.iter().zip(&tokenized) {
        println!("{e:35} -> {t:?}");
    }
    println!(
        "n-grams of the first event: {:?}",
        extract_ngrams(&tokenized[0], 2)
    );

    let vocab = Vocabulary::build(tokenized.iter().map(Vec::as_slice), 1);
    println!(
        "vocabulary of {} entries, words: {:?}",
        vocab.len(),
        vocab.words()
    );
    let ids = vocab.encode(&tokenize("PersonX makes tea"));
    println!("encode(\"PersonX makes tea\") = {ids:?}");
    println!("decode = {}", detokenize(&vocab.decode(&ids)));
}
