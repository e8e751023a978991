use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::ParamSet;
use crate::text::Vocabulary;

/// Copies vectors from a whitespace-separated text file (`word v1 … vd`,
/// GloVe layout) into the rows of `embed` for words in `vocab`. Returns
/// how many rows were replaced.
pub fn load_embeddings(path: &Path, vocab: &Vocabulary, params: &mut ParamSet) -> Result<usize> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let table = params.by_name_mut("embed")?;
    let dim = table.shape()[1];
    let mut loaded = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let values: Vec<f64> = parts
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| Error::malformed(path, i + 1, "non-numeric vector component"))?;
        if values.len() != dim {
            return Err(Error::malformed(
                path,
                i + 1,
                format!("expected {dim} components, found {}", values.len()),
            ));
        }
        if vocab.contains(word) {
            table.row_mut(vocab.id(word)).copy_from_slice(&values);
            loaded += 1;
        }
    }
    Ok(loaded)
}
