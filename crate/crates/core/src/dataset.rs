//! Labeled text data: label sets, examples, deduplicated datasets and the
//! line-delimited record format.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid label `{0}`")]
    InvalidLabel(String),
    #[error("invalid label set: {0}")]
    InvalidLabelSet(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("class `{label}` has {available} examples, {requested} requested")]
    InsufficientData {
        label: String,
        available: usize,
        requested: usize,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dedup key for a piece of text.
///
/// Compatibility-normalizes, lowercases, maps every non-alphanumeric
/// codepoint to a space and collapses whitespace runs.
pub fn normalize_text(text: &str) -> String {
    let lowered: String = text.nfkc().collect::<String>().to_lowercase();
    // Lowercasing can emit sequences that are not in NFKC form.
    let recomposed: String = lowered.nfkc().collect();
    let mut out = String::with_capacity(recomposed.len());
    let mut pending_space = false;
    for ch in recomposed.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        } else {
            pending_space = true;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl Label {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: None,
        }
    }

    pub fn with_description(name: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            description: Some(description.into()),
        }
    }
}

/// Ordered set of task labels. The order defines class indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct LabelSet {
    labels: Vec<Label>,
}

impl LabelSet {
    pub fn new(labels: Vec<Label>) -> Result<Self, DatasetError> {
        if labels.len() < 2 {
            return Err(DatasetError::InvalidLabelSet(format!(
                "need at least 2 labels, got {}",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if label.name.trim().is_empty() {
                return Err(DatasetError::InvalidLabelSet("empty label name".into()));
            }
            if !seen.insert(label.name.as_str()) {
                return Err(DatasetError::InvalidLabelSet(format!(
                    "duplicate label `{}`",
                    label.name
                )));
            }
        }
        Ok(Self { labels })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, DatasetError> {
        Self::new(names.iter().map(|n| Label::new(n.as_ref())).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    pub fn get(&self, index: usize) -> Option<&Label> {
        self.labels.get(index)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|l| l.name.as_str())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Label> {
        self.labels.iter()
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let labels = Vec::<Label>::deserialize(deserializer)?;
        LabelSet::new(labels).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Seed,
    Generated,
    Validation,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Seed => "seed",
            Origin::Generated => "generated",
            Origin::Validation => "validation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub text: String,
    pub label: String,
    pub origin: Origin,
    /// 0 for seed and initialization data.
    pub iteration: u32,
}

impl Example {
    pub fn new(text: impl Into<String>, label: impl Into<String>, origin: Origin, iteration: u32) -> Self {
        Self {
            text: text.into(),
            label: label.into(),
            origin,
            iteration,
        }
    }

    pub fn seed(text: impl Into<String>, label: impl Into<String>) -> Self {
        Self::new(text, label, Origin::Seed, 0)
    }
}

/// An ordered collection of examples with unique normalized texts.
#[derive(Debug, Clone)]
pub struct Dataset {
    labels: LabelSet,
    examples: Vec<Example>,
    index: HashSet<String>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels && self.examples == other.examples
    }
}

impl Eq for Dataset {}

impl Serialize for Dataset {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.examples.serialize(serializer)
    }
}

impl Dataset {
    pub fn new(labels: LabelSet) -> Self {
        Self {
            labels,
            examples: Vec::new(),
            index: HashSet::new(),
        }
    }

    /// Builds a dataset from examples, silently dropping duplicates.
    pub fn from_examples(
        labels: LabelSet,
        examples: impl IntoIterator<Item = Example>,
    ) -> Result<Self, DatasetError> {
        let mut ds = Self::new(labels);
        for ex in examples {
            ds.insert(ex)?;
        }
        Ok(ds)
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Whether the normalized form of `text` is already present.
    pub fn contains_text(&self, text: &str) -> bool {
        self.index.contains(&normalize_text(text))
    }

    pub fn contains_key(&self, normalized: &str) -> bool {
        self.index.contains(normalized)
    }

    /// Appends `example` unless its normalized text is empty or already
    /// present. Returns whether it was accepted.
    pub fn insert(&mut self, example: Example) -> Result<bool, DatasetError> {
        if !self.labels.contains(&example.label) {
            return Err(DatasetError::InvalidLabel(example.label));
        }
        let key = normalize_text(&example.text);
        if key.is_empty() || self.index.contains(&key) {
            return Ok(false);
        }
        self.index.insert(key);
        self.examples.push(example);
        Ok(true)
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> =
            self.labels.names().map(|n| (n.to_string(), 0)).collect();
        for ex in &self.examples {
            *counts.get_mut(&ex.label).expect("label validated on insert") += 1;
        }
        counts
    }

    /// Counts in label-set order.
    pub fn class_count_vec(&self) -> Vec<usize> {
        let mut counts = vec![0; self.labels.len()];
        for ex in &self.examples {
            counts[self.labels.index_of(&ex.label).expect("label validated on insert")] += 1;
        }
        counts
    }

    pub fn distinct_labels(&self) -> usize {
        self.class_count_vec().iter().filter(|&&c| c > 0).count()
    }

    /// Exactly `k` examples per class, chosen uniformly with a seeded RNG.
    /// Output keeps the input order of the chosen examples.
    pub fn stratified_sample(&self, k: usize, seed: u64) -> Result<Dataset, DatasetError> {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.labels.len()];
        for (i, ex) in self.examples.iter().enumerate() {
            by_class[self.labels.index_of(&ex.label).expect("validated")].push(i);
        }
        for (class, members) in by_class.iter().enumerate() {
            if members.len() < k {
                return Err(DatasetError::InsufficientData {
                    label: self.labels.get(class).expect("in range").name.clone(),
                    available: members.len(),
                    requested: k,
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen: Vec<usize> = Vec::with_capacity(k * by_class.len());
        for members in &by_class {
            chosen.extend(members.choose_multiple(&mut rng, k).copied());
        }
        chosen.sort_unstable();
        let mut out = Dataset::new(self.labels.clone());
        for i in chosen {
            out.insert(self.examples[i].clone())?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub label_set: LabelSet,
    #[serde(skip)]
    seed_examples: Option<Dataset>,
    pub shots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_description: Option<String>,
}

impl TaskSpec {
    pub fn zero_shot(label_set: LabelSet, task_description: Option<String>) -> Self {
        Self {
            label_set,
            seed_examples: None,
            shots: 0,
            task_description,
        }
    }

    /// Few-shot task; `seed_examples` must hold exactly `shots` examples per label.
    pub fn few_shot(
        seed_examples: Dataset,
        shots: usize,
        task_description: Option<String>,
    ) -> Result<Self, DatasetError> {
        let label_set = seed_examples.labels().clone();
        if shots == 0 {
            if !seed_examples.is_empty() {
                return Err(DatasetError::InvalidTask(
                    "shots = 0 but seed examples were given".into(),
                ));
            }
            return Ok(Self::zero_shot(label_set, task_description));
        }
        for (label, count) in seed_examples.class_counts() {
            if count != shots {
                return Err(DatasetError::InvalidTask(format!(
                    "label `{label}` has {count} seed examples, expected {shots}"
                )));
            }
        }
        Ok(Self {
            label_set,
            seed_examples: Some(seed_examples),
            shots,
            task_description,
        })
    }

    pub fn seed_examples(&self) -> Dataset {
        self.seed_examples
            .clone()
            .unwrap_or_else(|| Dataset::new(self.label_set.clone()))
    }
}

#[derive(Serialize)]
struct RecordOut<'a> {
    text: &'a str,
    label: &'a str,
    origin: Origin,
    iteration: u32,
}

#[derive(Deserialize)]
struct RecordIn {
    text: String,
    label: String,
    origin: Option<Origin>,
    iteration: Option<u32>,
}

/// Result of reading a record file.
#[derive(Debug, Clone)]
pub struct ReadOutcome {
    pub dataset: Dataset,
    /// 1-based line numbers of records rejected as duplicates or empty.
    pub skipped_lines: Vec<usize>,
}

fn parse_records(contents: &str) -> Result<Vec<(usize, Example)>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in contents.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordIn = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push((
            line_no,
            Example {
                text: rec.text,
                label: rec.label,
                origin: rec.origin.unwrap_or(Origin::Seed),
                iteration: rec.iteration.unwrap_or(0),
            },
        ));
    }
    Ok(out)
}

/// Reads a record file. When `labels` is `None` the label set is inferred
/// in order of first appearance.
pub fn read_records(path: impl AsRef<Path>, labels: Option<&LabelSet>) -> Result<ReadOutcome, DatasetError> {
    let contents = fs::read_to_string(path)?;
    let records = parse_records(&contents)?;
    let labels = match labels {
        Some(l) => l.clone(),
        None => {
            let mut names: Vec<&str> = Vec::new();
            for (_, ex) in &records {
                if !names.contains(&ex.label.as_str()) {
                    names.push(&ex.label);
                }
            }
            LabelSet::from_names(&names)?
        }
    };
    let mut dataset = Dataset::new(labels);
    let mut skipped_lines = Vec::new();
    for (line, ex) in records {
        let accepted = dataset.insert(ex).map_err(|e| match e {
            DatasetError::InvalidLabel(l) => DatasetError::Parse {
                line,
                message: format!("invalid label `{l}`"),
            },
            other => other,
        })?;
        if !accepted {
            skipped_lines.push(line);
        }
    }
    Ok(ReadOutcome {
        dataset,
        skipped_lines,
    })
}

pub fn write_records(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for ex in dataset.iter() {
        let rec = RecordOut {
            text: &ex.text,
            label: &ex.label,
            origin: ex.origin,
            iteration: ex.iteration,
        };
        serde_json::to_writer(&mut w, &rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
