use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, Network};
use crate::error::{Error, Result};
use crate::tensor::ParamSet;
use crate::text::Vocabulary;

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "infergen-checkpoint";

/// A trained model: architecture, vocabulary, relation names and weights.
/// Stored as JSON; `f64` values round-trip exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub relations: Vec<String>,
    pub params: ParamSet,
}

impl Checkpoint {
    pub fn new(
        config: ModelConfig,
        vocab: Vocabulary,
        relations: Vec<String>,
        params: ParamSet,
    ) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config,
            vocab,
            relations,
            params,
        }
    }

    pub fn network(&self) -> Result<Network> {
        Network::new(self.config.clone(), self.vocab.len(), self.relations.len())
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r == name)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// Reads and validates a checkpoint: format tag, version, and parameter
    /// shapes against the stored architecture.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        ck.validate()?;
        Ok(ck)
    }

    /// Checks the format tag, version, and parameter shapes against the
    /// stored architecture.
    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(Error::Checkpoint(format!(
                "unexpected format tag `{}`",
                self.format
            )));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "version {} is not supported (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let net = self.network()?;
        net.check_params(&self.params).map_err(|e| match e {
            Error::Checkpoint(msg)
                if self
                    .params
                    .by_name("embed")
                    .is_ok_and(|t| t.shape()[0] != self.vocab.len()) =>
            {
                Error::VocabMismatch(format!(
                    "embedding rows differ from vocabulary size {}: {msg}",
                    self.vocab.len()
                ))
            }
            other => other,
        })
    }
}
