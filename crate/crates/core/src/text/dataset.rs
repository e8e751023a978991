use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::error::{Error, Result};

pub const EVENT2MIND_RELATIONS: [&str; 3] = ["xIntent", "xReact", "oReact"];
pub const ATOMIC_RELATIONS: [&str; 9] = [
    "xIntent", "xNeed", "xAttr", "xEffect", "xWant", "xReact", "oEffect", "oWant", "oReact",
];

/// Column names of the public Event2Mind CSV files and the relation each one
/// holds.
const EVENT2MIND_COLUMNS: [(&str, &str); 3] = [
    ("Xintent", "xIntent"),
    ("Xemotion", "xReact"),
    ("Otheremotion", "oReact"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetMode {
    Event2Mind,
    Atomic,
    Generic,
}

impl FromStr for DatasetMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "event2mind" => Ok(DatasetMode::Event2Mind),
            "atomic" => Ok(DatasetMode::Atomic),
            "generic" => Ok(DatasetMode::Generic),
            other => Err(format!("unknown dataset mode `{other}`")),
        }
    }
}

impl fmt::Display for DatasetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetMode::Event2Mind => "event2mind",
            DatasetMode::Atomic => "atomic",
            DatasetMode::Generic => "generic",
        })
    }
}

/// Index of a relation within a [`RelationSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub usize);

impl RelationId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The closed, ordered set of relations of a dataset mode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSet {
    names: Vec<String>,
}

impl RelationSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        RelationSet {
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    pub fn for_mode(mode: DatasetMode) -> Self {
        match mode {
            DatasetMode::Event2Mind => Self::new(EVENT2MIND_RELATIONS),
            DatasetMode::Atomic => Self::new(ATOMIC_RELATIONS),
            DatasetMode::Generic => Self::new(Vec::<String>::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<RelationId> {
        self.names.iter().position(|n| n == name).map(RelationId)
    }

    pub fn name(&self, id: RelationId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.names.len()).map(RelationId)
    }

    fn intern(&mut self, name: &str) -> RelationId {
        self.get(name).unwrap_or_else(|| {
            self.names.push(name.to_string());
            RelationId(self.names.len() - 1)
        })
    }
}

/// One (event, relation, target) triplet.
#[derive(Clone, Debug, PartialEq)]
pub struct EventExample {
    pub event: String,
    pub event_tokens: Vec<String>,
    pub relation: RelationId,
    pub target: String,
    pub target_tokens: Vec<String>,
}

impl EventExample {
    pub fn new(event: &str, relation: RelationId, target: &str) -> Self {
        EventExample {
            event: event.to_string(),
            event_tokens: tokenize(event),
            relation,
            target: target.to_string(),
            target_tokens: tokenize(target),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub relations: usize,
    pub events: usize,
    pub triplets: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub mode: DatasetMode,
    pub relations: RelationSet,
    pub examples: Vec<EventExample>,
}

impl Dataset {
    pub fn new(mode: DatasetMode, relations: RelationSet) -> Self {
        Dataset {
            mode,
            relations,
            examples: Vec::new(),
        }
    }

    /// Appends a triplet; in generic mode unseen relations are added.
    pub fn push(
        &mut self,
        event: &str,
        relation: &str,
        target: &str,
        line: Option<usize>,
    ) -> Result<()> {
        let rel = match self.mode {
            DatasetMode::Generic => self.relations.intern(relation),
            _ => self
                .relations
                .get(relation)
                .ok_or_else(|| Error::UnknownRelation {
                    name: relation.to_string(),
                    line,
                })?,
        };
        let ex = EventExample::new(event, rel, target);
        if ex.event_tokens.is_empty() {
            return Err(Error::EmptyInput(format!(
                "event text{}",
                line.map(|l| format!(" at line {l}")).unwrap_or_default()
            )));
        }
        self.examples.push(ex);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn stats(&self) -> DatasetStats {
        let events: HashSet<&str> = self.examples.iter().map(|e| e.event.as_str()).collect();
        let relations: HashSet<RelationId> = self.examples.iter().map(|e| e.relation).collect();
        DatasetStats {
            relations: relations.len(),
            events: events.len(),
            triplets: self.examples.len(),
        }
    }

    pub fn for_relation(&self, rel: RelationId) -> Vec<&EventExample> {
        self.examples.iter().filter(|e| e.relation == rel).collect()
    }

    /// Relations that have at least one example, in set order.
    pub fn present_relations(&self) -> Vec<RelationId> {
        let present: HashSet<RelationId> = self.examples.iter().map(|e| e.relation).collect();
        self.relations
            .ids()
            .filter(|r| present.contains(r))
            .collect()
    }

    /// Targets grouped by (event, relation), groups in first-appearance order.
    pub fn grouped_targets(&self) -> Vec<(String, RelationId, Vec<String>)> {
        let mut order: Vec<(String, RelationId)> = Vec::new();
        let mut groups: BTreeMap<(String, RelationId), Vec<String>> = BTreeMap::new();
        for ex in &self.examples {
            let key = (ex.event.clone(), ex.relation);
            let entry = groups.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                Vec::new()
            });
            entry.push(ex.target.clone());
        }
        order
            .into_iter()
            .map(|k| {
                let targets = groups.remove(&k).unwrap();
                (k.0, k.1, targets)
            })
            .collect()
    }

    /// Restricts to the given events, keeping example order.
    pub fn filter_events(&self, keep: impl Fn(&str) -> bool) -> Dataset {
        Dataset {
            mode: self.mode,
            relations: self.relations.clone(),
            examples: self
                .examples
                .iter()
                .filter(|e| keep(&e.event))
                .cloned()
                .collect(),
        }
    }
}

/// Loads a dataset file or directory.
///
/// `.csv` files are read with the public layout of the given mode (JSON-list
/// cells flattened to one triplet per element); anything else is the generic
/// `event<TAB>relation<TAB>target` format. A directory loads every `.csv`
/// (or `.tsv`) file in name order; for ATOMIC a present
/// `v4_atomic_all_agg.csv` is used alone since the split files repeat it.
pub fn load_dataset(path: &Path, mode: DatasetMode) -> Result<Dataset> {
    let mut ds = Dataset::new(mode, RelationSet::for_mode(mode));
    for file in dataset_files(path, mode)? {
        let is_csv = file
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        match (is_csv, mode) {
            (true, DatasetMode::Event2Mind) => read_event2mind_csv(&file, &mut ds)?,
            (true, DatasetMode::Atomic) => read_atomic_csv(&file, &mut ds)?,
            _ => read_tsv(&file, &mut ds)?,
        }
    }
    Ok(ds)
}

fn dataset_files(path: &Path, mode: DatasetMode) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            ));
        }
        return Ok(vec![path.to_path_buf()]);
    }
    let agg = path.join("v4_atomic_all_agg.csv");
    if mode == DatasetMode::Atomic && agg.is_file() {
        return Ok(vec![agg]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "csv" | "tsv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no dataset files in {}",
            path.display()
        )));
    }
    Ok(files)
}

fn read_tsv(path: &Path, ds: &mut Dataset) -> Result<()> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::malformed(
                path,
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        ds.push(
            fields[0].trim(),
            fields[1].trim(),
            fields[2].trim(),
            Some(line_no),
        )?;
    }
    Ok(())
}

fn parse_list_cell(path: &Path, line: usize, cell: &str) -> Result<Vec<String>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    serde_json::from_str::<Vec<String>>(cell)
        .map_err(|e| Error::malformed(path, line, format!("bad list cell {cell:?}: {e}")))
}

fn csv_reader(path: &Path) -> Result<(csv::Reader<fs::File>, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::malformed(path, 1, e.to_string()))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::malformed(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    Ok((rdr, headers))
}

fn column(path: &Path, headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::malformed(path, 1, format!("missing column `{name}`")))
}

fn read_event2mind_csv(path: &Path, ds: &mut Dataset) -> Result<()> {
    let (mut rdr, headers) = csv_reader(path)?;
    let event_col = column(path, &headers, "Event")?;
    let cols: Vec<(usize, &str)> = EVENT2MIND_COLUMNS
        .iter()
        .map(|(c, r)| column(path, &headers, c).map(|i| (i, *r)))
        .collect::<Result<_>>()?;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::malformed(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let event = record.get(event_col).unwrap_or_default().trim();
        for (col, rel) in &cols {
            for target in parse_list_cell(path, line, record.get(*col).unwrap_or_default())? {
                ds.push(event, rel, target.trim(), Some(line))?;
            }
        }
    }
    Ok(())
}

fn read_atomic_csv(path: &Path, ds: &mut Dataset) -> Result<()> {
    let (mut rdr, headers) = csv_reader(path)?;
    let event_col = column(path, &headers, "event")?;
    let cols: Vec<(usize, &str)> = ATOMIC_RELATIONS
        .iter()
        .map(|r| column(path, &headers, r).map(|i| (i, *r)))
        .collect::<Result<_>>()?;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::malformed(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let event = record.get(event_col).unwrap_or_default().trim();
        for (col, rel) in &cols {
            for target in parse_list_cell(path, line, record.get(*col).unwrap_or_default())? {
                ds.push(event, rel, target.trim(), Some(line))?;
            }
        }
    }
    Ok(())
}

/// Writes the generic TSV layout.
pub fn write_tsv(path: &Path, ds: &Dataset) -> Result<()> {
    let mut out = String::new();
    for ex in &ds.examples {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            ex.event,
            ds.relations.name(ex.relation),
            ex.target
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One line of a gold-set JSONL file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub event: String,
    pub relation: String,
    pub gold: Vec<String>,
}

pub fn load_gold_jsonl(path: &Path) -> Result<Vec<GoldRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GoldRecord = serde_json::from_str(&line)
            .map_err(|e| Error::malformed(path, i + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_gold_jsonl(path: &Path, records: &[GoldRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("gold records serialize"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Converts gold records into a dataset with one triplet per gold string.
pub fn gold_to_dataset(records: &[GoldRecord], mode: DatasetMode) -> Result<Dataset> {
    let mut ds = Dataset::new(mode, RelationSet::for_mode(mode));
    for (i, r) in records.iter().enumerate() {
        for g in &r.gold {
            ds.push(&r.event, &r.relation, g, Some(i + 1))?;
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn generic_tsv_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "d.tsv",
            "PersonX makes coffee\txIntent\tto be helpful\nPersonX makes coffee\toReact\tnone\n",
        );
        let ds = load_dataset(&p, DatasetMode::Generic).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.examples[1].target_tokens, vec!["none".to_string()]);
        assert_eq!(
            ds.relations.names(),
            &["xIntent".to_string(), "oReact".to_string()]
        );
        let st = ds.stats();
        assert_eq!((st.relations, st.events, st.triplets), (2, 1, 2));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "d.tsv", "a\txIntent\tb\nbroken line\n");
        match load_dataset(&p, DatasetMode::Generic).unwrap_err() {
            Error::Malformed { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_relation_in_closed_mode() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "d.tsv", "PersonX runs\txNeed\tshoes\n");
        match load_dataset(&p, DatasetMode::Event2Mind).unwrap_err() {
            Error::UnknownRelation { name, line } => {
                assert_eq!(name, "xNeed");
                assert_eq!(line, Some(1));
            }
            e => panic!("unexpected {e}"),
        }
        assert!(load_dataset(&p, DatasetMode::Atomic).is_ok());
    }

    #[test]
    fn event2mind_csv_flattens_lists() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "train.csv",
            "Source,Event,Xintent,Xemotion,Otheremotion,Xsent,Osent\n\
             rocstory,PersonX makes PersonY's coffee,\"[\"\"to be helpful\"\", \"\"to be nice\"\"]\",\"[\"\"happy\"\"]\",\"[\"\"grateful\"\"]\",,\n\
             rocstory,PersonX runs,\"[\"\"none\"\"]\",\"[]\",\"[\"\"none\"\"]\",,\n",
        );
        let ds = load_dataset(&p, DatasetMode::Event2Mind).unwrap();
        let st = ds.stats();
        assert_eq!((st.relations, st.events, st.triplets), (3, 2, 6));
    }

    #[test]
    fn atomic_csv_flattens_lists() {
        let dir = tempfile::tempdir().unwrap();
        let mut header = String::from("event");
        for r in ATOMIC_RELATIONS {
            header.push(',');
            header.push_str(r);
        }
        header.push_str(",prefix,split\n");
        let mut row = String::from("PersonX drinks ___ everyday");
        for (i, _) in ATOMIC_RELATIONS.iter().enumerate() {
            row.push_str(&format!(",\"[\"\"t{i}a\"\", \"\"t{i}b\"\"]\""));
        }
        row.push_str(",\"[\"\"drink\"\"]\",trn\n");
        let p = write(dir.path(), "v4_atomic_all_agg.csv", &(header + &row));
        let ds = load_dataset(dir.path(), DatasetMode::Atomic).unwrap();
        let st = ds.stats();
        assert_eq!((st.relations, st.events, st.triplets), (9, 1, 18));
        let again = load_dataset(&p, DatasetMode::Atomic).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn bad_list_cell_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "x.csv",
            "Source,Event,Xintent,Xemotion,Otheremotion\ns,PersonX runs,[oops,[],[]\n",
        );
        assert!(matches!(
            load_dataset(&p, DatasetMode::Event2Mind).unwrap_err(),
            Error::Malformed { line: 2, .. }
        ));
    }

    #[test]
    fn gold_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.jsonl");
        let recs = vec![GoldRecord {
            event: "PersonX makes coffee".into(),
            relation: "xIntent".into(),
            gold: vec!["to be helpful".into(), "none".into()],
        }];
        write_gold_jsonl(&p, &recs).unwrap();
        assert_eq!(load_gold_jsonl(&p).unwrap(), recs);
        let ds = gold_to_dataset(&recs, DatasetMode::Event2Mind).unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn grouping_keeps_first_appearance() {
        let mut ds = Dataset::new(
            DatasetMode::Generic,
            RelationSet::for_mode(DatasetMode::Generic),
        );
        ds.push("b event", "r", "x", None).unwrap();
        ds.push("a event", "r", "y", None).unwrap();
        ds.push("b event", "r", "z", None).unwrap();
        let g = ds.grouped_targets();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].0, "b event");
        assert_eq!(g[0].2, vec!["x".to_string(), "z".to_string()]);
    }
}
