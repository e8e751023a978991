use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mode: String,
    pub train_loss: f64,
    pub dev_loss: BTreeMap<String, f64>,
    pub wall_seconds: f64,
}

impl EpochRecord {
    pub fn new(
        epoch: usize,
        mode: &str,
        train_loss: f64,
        dev_loss: BTreeMap<String, f64>,
        wall_seconds: f64,
    ) -> Self {
        EpochRecord {
            epoch,
            mode: mode.to_string(),
            train_loss,
            dev_loss,
            wall_seconds,
        }
    }
}

/// JSONL sink for [`EpochRecord`]s; `TrainLog::none()` discards them.
pub struct TrainLog {
    out: Option<(PathBuf, BufWriter<File>)>,
}

impl TrainLog {
    pub fn none() -> Self {
        TrainLog { out: None }
    }

    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(TrainLog {
            out: Some((path.to_path_buf(), BufWriter::new(file))),
        })
    }

    pub fn write(&mut self, rec: &EpochRecord) -> Result<()> {
        if let Some((path, w)) = &mut self.out {
            let line = serde_json::to_string(rec).expect("records serialize");
            writeln!(w, "{line}")
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path.as_path(), e))?;
        }
        Ok(())
    }
}
