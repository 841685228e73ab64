//! Labeled hate-speech corpora: loading, validation, unanimity filtering,
//! label balancing and per-group slicing.
//!
//! The canonical on-disk format is JSONL, one example per line:
//!
//! ```json
//! {"id":"a","text":"hello","gold_label":0,"annotator_labels":[0,0,0],"groups":["female"],"dataset":"toxigen"}
//! ```
//!
//! CSV files with the same column names are accepted as a convenience; the
//! `groups` and `annotator_labels` columns hold semicolon-joined lists.
//!
//! Corpora are immutable once loaded. Every transformation returns a new
//! [`Corpus`] and appends a note to its [`Provenance`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;

/// The eight target groups audited by default, with display names.
pub const DEFAULT_GROUPS: [(&str, &str); 8] = [
    ("asian", "Asian"),
    ("black", "Black"),
    ("disability", "Disability"),
    ("female", "Female"),
    ("jewish", "Jewish"),
    ("latinx", "Latinx"),
    ("lgbtqia", "LGBTQIA+"),
    ("muslim", "Muslim"),
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid records at lines {}", line_list(.0))]
    InvalidRecords(Vec<RecordError>),
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("stratum `{0}` has no examples of one label")]
    EmptyStratum(String),
    #[error("invalid group registry: {0}")]
    Registry(String),
}

fn line_list(errors: &[RecordError]) -> String {
    errors
        .iter()
        .map(|e| e.line.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// One rejected input record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    /// 1-based line number in the source file.
    pub line: usize,
    pub kind: RecordErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordErrorKind {
    /// A required field is missing or has the wrong shape.
    Malformed { field: String, detail: String },
    UnknownGroup(String),
    DuplicateId(String),
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RecordErrorKind::Malformed { field, detail } => {
                write!(f, "line {}: malformed `{field}`: {detail}", self.line)
            }
            RecordErrorKind::UnknownGroup(tag) => {
                write!(f, "line {}: unknown group `{tag}`", self.line)
            }
            RecordErrorKind::DuplicateId(id) => write!(f, "line {}: duplicate id `{id}`", self.line),
        }
    }
}

/// Binary hate label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    NonHate = 0,
    Hate = 1,
}

impl Label {
    pub fn is_hate(self) -> bool {
        self == Label::Hate
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

impl From<bool> for Label {
    fn from(hate: bool) -> Self {
        if hate {
            Label::Hate
        } else {
            Label::NonHate
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::NonHate),
            1 => Ok(Label::Hate),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

/// Registered target-group identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupRegistry {
    groups: BTreeMap<String, String>,
}

impl Default for GroupRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl GroupRegistry {
    pub fn builtin() -> Self {
        Self {
            groups: DEFAULT_GROUPS
                .iter()
                .map(|(id, name)| (id.to_string(), name.to_string()))
                .collect(),
        }
    }

    /// Parses a TOML registry of the form
    ///
    /// ```toml
    /// [groups]
    /// asian = "Asian"
    /// ```
    pub fn from_toml_str(src: &str) -> Result<Self, CorpusError> {
        #[derive(Deserialize)]
        struct File {
            groups: BTreeMap<String, String>,
        }
        let file: File = toml::from_str(src).map_err(|e| CorpusError::Registry(e.to_string()))?;
        if file.groups.is_empty() {
            return Err(CorpusError::Registry("no groups defined".into()));
        }
        Ok(Self {
            groups: file.groups,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let src = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&src)
    }

    pub fn register(&mut self, id: impl Into<String>, display_name: impl Into<String>) {
        self.groups.insert(id.into(), display_name.into());
    }

    pub fn contains(&self, id: &str) -> bool {
        self.groups.contains_key(id)
    }

    pub fn display_name(&self, id: &str) -> Option<&str> {
        self.groups.get(id).map(String::as_str)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }
}

/// One corpus sentence with its gold label and annotation metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    pub gold_label: Label,
    #[serde(default)]
    pub annotator_labels: Vec<Label>,
    #[serde(default)]
    pub groups: BTreeSet<String>,
    pub dataset: String,
}

/// Where a corpus came from and what was done to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    /// Load options followed by every transformation applied since.
    pub options: Vec<String>,
    /// SHA-256 of the source file bytes.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    examples: Vec<LabeledExample>,
    provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

/// Balancing stratum: the whole corpus, or one group slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stratum {
    Aggregate,
    Group(String),
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stratum::Aggregate => f.write_str("aggregate"),
            Stratum::Group(g) => f.write_str(g),
        }
    }
}

impl Corpus {
    /// Builds a corpus from in-memory examples, checking the same invariants
    /// as [`load_corpus`]. Line numbers in errors are 1-based positions.
    pub fn from_examples(
        examples: Vec<LabeledExample>,
        registry: &GroupRegistry,
    ) -> Result<Self, CorpusError> {
        let mut errors = Vec::new();
        let mut seen = HashSet::new();
        for (i, ex) in examples.iter().enumerate() {
            validate_example(ex, i + 1, registry, &mut seen, &mut errors);
        }
        if !errors.is_empty() {
            return Err(CorpusError::InvalidRecords(errors));
        }
        let digest = sha256_hex(to_jsonl_bytes(&examples));
        Ok(Self {
            examples,
            provenance: Provenance {
                source: None,
                options: vec!["in-memory".into()],
                digest,
            },
        })
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LabeledExample> {
        self.examples.iter().find(|e| e.id == id)
    }

    /// Number of (hate, non-hate) examples.
    pub fn label_counts(&self) -> (usize, usize) {
        let hate = self.examples.iter().filter(|e| e.gold_label.is_hate()).count();
        (hate, self.examples.len() - hate)
    }

    fn derive(&self, examples: Vec<LabeledExample>, note: String) -> Corpus {
        let mut provenance = self.provenance.clone();
        provenance.options.push(note);
        Corpus {
            examples,
            provenance,
        }
    }

    /// Serializes as canonical JSONL.
    pub fn to_jsonl(&self) -> Vec<u8> {
        to_jsonl_bytes(&self.examples)
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_jsonl()).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })
    }
}

fn to_jsonl_bytes(examples: &[LabeledExample]) -> Vec<u8> {
    let mut out = Vec::new();
    for ex in examples {
        serde_json::to_writer(&mut out, ex).expect("examples always serialize");
        out.push(b'\n');
    }
    out
}

fn validate_example(
    ex: &LabeledExample,
    line: usize,
    registry: &GroupRegistry,
    seen: &mut HashSet<String>,
    errors: &mut Vec<RecordError>,
) {
    if ex.text.trim().is_empty() {
        errors.push(RecordError {
            line,
            kind: RecordErrorKind::Malformed {
                field: "text".into(),
                detail: "empty after trimming".into(),
            },
        });
    }
    for g in &ex.groups {
        if !registry.contains(g) {
            errors.push(RecordError {
                line,
                kind: RecordErrorKind::UnknownGroup(g.clone()),
            });
        }
    }
    if !seen.insert(ex.id.clone()) {
        errors.push(RecordError {
            line,
            kind: RecordErrorKind::DuplicateId(ex.id.clone()),
        });
    }
}

/// Loads a corpus file, rejecting (never dropping) invalid records.
///
/// All problems in the file are collected so one error lists every bad line.
pub fn load_corpus(
    path: &Path,
    format: CorpusFormat,
    registry: &GroupRegistry,
) -> Result<Corpus, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut corpus = parse_corpus(&bytes, format, registry)?;
    corpus.provenance = Provenance {
        source: Some(path.to_owned()),
        options: vec![format!("format={format:?}").to_lowercase()],
        digest: sha256_hex(&bytes),
    };
    Ok(corpus)
}

/// Parses corpus bytes in the given format. See [`load_corpus`].
pub fn parse_corpus(
    bytes: &[u8],
    format: CorpusFormat,
    registry: &GroupRegistry,
) -> Result<Corpus, CorpusError> {
    let mut errors = Vec::new();
    let parsed = match format {
        CorpusFormat::Jsonl => parse_jsonl(bytes, &mut errors),
        CorpusFormat::Csv => parse_csv(bytes, &mut errors),
    };
    let mut seen = HashSet::new();
    let mut examples = Vec::with_capacity(parsed.len());
    for (line, ex) in parsed {
        validate_example(&ex, line, registry, &mut seen, &mut errors);
        examples.push(ex);
    }
    if !errors.is_empty() {
        errors.sort_by_key(|e| e.line);
        return Err(CorpusError::InvalidRecords(errors));
    }
    Ok(Corpus {
        examples,
        provenance: Provenance {
            source: None,
            options: vec![format!("format={format:?}").to_lowercase()],
            digest: sha256_hex(bytes),
        },
    })
}

fn parse_jsonl(bytes: &[u8], errors: &mut Vec<RecordError>) -> Vec<(usize, LabeledExample)> {
    let text = String::from_utf8_lossy(bytes);
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(raw) {
            Ok(v) => v,
            Err(e) => {
                errors.push(malformed(line, "record", e.to_string()));
                continue;
            }
        };
        match example_from_json(&value) {
            Ok(ex) => out.push((line, ex)),
            Err((field, detail)) => errors.push(malformed(line, field, detail)),
        }
    }
    out
}

fn malformed(line: usize, field: &str, detail: String) -> RecordError {
    RecordError {
        line,
        kind: RecordErrorKind::Malformed {
            field: field.to_string(),
            detail,
        },
    }
}

type FieldError = (&'static str, String);

fn example_from_json(v: &serde_json::Value) -> Result<LabeledExample, FieldError> {
    let obj = v
        .as_object()
        .ok_or(("record", "expected a JSON object".to_string()))?;
    let id = match obj.get("id") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(serde_json::Value::Number(n)) => n.to_string(),
        Some(_) => return Err(("id", "expected a string".into())),
        None => return Err(("id", "missing".into())),
    };
    let text = match obj.get("text") {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(_) => return Err(("text", "expected a string".into())),
        None => return Err(("text", "missing".into())),
    };
    let gold_label = match obj.get("gold_label") {
        Some(v) => json_label(v).map_err(|d| ("gold_label", d))?,
        None => return Err(("gold_label", "missing".into())),
    };
    let annotator_labels = match obj.get("annotator_labels") {
        None | Some(serde_json::Value::Null) => Vec::new(),
        Some(serde_json::Value::Array(items)) => items
            .iter()
            .map(json_label)
            .collect::<Result<_, _>>()
            .map_err(|d| ("annotator_labels", d))?,
        Some(_) => return Err(("annotator_labels", "expected an array".into())),
    };
    let groups = match obj.get("groups") {
        None | Some(serde_json::Value::Null) => BTreeSet::new(),
        Some(serde_json::Value::Array(items)) => items
            .iter()
            .map(|g| {
                g.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| "group tags must be strings".to_string())
            })
            .collect::<Result<_, _>>()
            .map_err(|d| ("groups", d))?,
        Some(_) => return Err(("groups", "expected an array".into())),
    };
    let dataset = match obj.get("dataset") {
        None | Some(serde_json::Value::Null) => String::new(),
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(_) => return Err(("dataset", "expected a string".into())),
    };
    Ok(LabeledExample {
        id,
        text,
        gold_label,
        annotator_labels,
        groups,
        dataset,
    })
}

fn json_label(v: &serde_json::Value) -> Result<Label, String> {
    match v.as_u64() {
        Some(n) if n <= 1 => Label::try_from(n as u8),
        _ => Err(format!("label must be 0 or 1, got {v}")),
    }
}

#[derive(Deserialize)]
struct CsvRecord {
    id: Option<String>,
    text: Option<String>,
    gold_label: Option<String>,
    #[serde(default)]
    annotator_labels: Option<String>,
    #[serde(default)]
    groups: Option<String>,
    #[serde(default)]
    dataset: Option<String>,
}

fn parse_csv(bytes: &[u8], errors: &mut Vec<RecordError>) -> Vec<(usize, LabeledExample)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(bytes);
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            errors.push(malformed(1, "header", e.to_string()));
            return Vec::new();
        }
    };
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                errors.push(malformed(line, "record", e.to_string()));
                continue;
            }
        };
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let parsed = rec
            .deserialize::<CsvRecord>(Some(&headers))
            .map_err(|e| ("record", e.to_string()))
            .and_then(example_from_csv);
        match parsed {
            Ok(ex) => out.push((line, ex)),
            Err((field, detail)) => errors.push(malformed(line, field, detail)),
        }
    }
    out
}

fn example_from_csv(rec: CsvRecord) -> Result<LabeledExample, FieldError> {
    let id = rec.id.filter(|s| !s.is_empty()).ok_or(("id", "missing".to_string()))?;
    let text = rec.text.ok_or(("text", "missing".to_string()))?;
    let gold = rec
        .gold_label
        .ok_or(("gold_label", "missing".to_string()))?;
    let gold_label = csv_label(&gold).map_err(|d| ("gold_label", d))?;
    let annotator_labels = split_list(rec.annotator_labels.as_deref())
        .map(csv_label)
        .collect::<Result<_, _>>()
        .map_err(|d| ("annotator_labels", d))?;
    let groups = split_list(rec.groups.as_deref()).map(str::to_string).collect();
    Ok(LabeledExample {
        id,
        text,
        gold_label,
        annotator_labels,
        groups,
        dataset: rec.dataset.unwrap_or_default(),
    })
}

fn split_list(s: Option<&str>) -> impl Iterator<Item = &str> {
    s.unwrap_or("")
        .split(';')
        .map(str::trim)
        .filter(|p| !p.is_empty())
}

fn csv_label(s: &str) -> Result<Label, String> {
    match s.trim() {
        "0" => Ok(Label::NonHate),
        "1" => Ok(Label::Hate),
        other => Err(format!("label must be 0 or 1, got `{other}`")),
    }
}

/// Writes a corpus as CSV with semicolon-joined list columns.
pub fn write_csv<W: Write>(corpus: &Corpus, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "id",
        "text",
        "gold_label",
        "annotator_labels",
        "groups",
        "dataset",
    ])?;
    for ex in corpus.examples() {
        let votes = ex
            .annotator_labels
            .iter()
            .map(|l| l.as_u8().to_string())
            .collect::<Vec<_>>()
            .join(";");
        let groups = ex.groups.iter().cloned().collect::<Vec<_>>().join(";");
        w.write_record([
            ex.id.as_str(),
            ex.text.as_str(),
            &ex.gold_label.as_u8().to_string(),
            &votes,
            &groups,
            ex.dataset.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Keeps examples with at least `min_annotators` votes that all agree, and
/// rewrites their gold label to the unanimous vote.
pub fn filter_unanimous(corpus: &Corpus, min_annotators: NonZeroUsize) -> Corpus {
    let kept = corpus
        .examples
        .iter()
        .filter(|ex| {
            ex.annotator_labels.len() >= min_annotators.get()
                && ex.annotator_labels.windows(2).all(|w| w[0] == w[1])
        })
        .map(|ex| LabeledExample {
            gold_label: ex.annotator_labels[0],
            ..ex.clone()
        })
        .collect();
    corpus.derive(kept, format!("filter_unanimous(min={min_annotators})"))
}

/// All and only the examples tagged with `group`, in corpus order.
pub fn group_slice(
    corpus: &Corpus,
    group: &str,
    registry: &GroupRegistry,
) -> Result<Corpus, CorpusError> {
    if !registry.contains(group) {
        return Err(CorpusError::UnknownGroup(group.to_string()));
    }
    let kept = corpus
        .examples
        .iter()
        .filter(|ex| ex.groups.contains(group))
        .cloned()
        .collect();
    Ok(corpus.derive(kept, format!("group_slice({group})")))
}

/// Downsamples the majority label within a stratum so both labels have equal
/// counts. Selection is uniform without replacement and deterministic for a
/// seed; surviving examples keep their original order.
///
/// For [`Stratum::Group`] the result is the balanced group slice. Each group
/// draws from its own seed stream, so balancing one group never depends on
/// another.
pub fn balance(
    corpus: &Corpus,
    stratum: &Stratum,
    seed: u64,
    registry: &GroupRegistry,
) -> Result<Corpus, CorpusError> {
    let (source, stream_seed) = match stratum {
        Stratum::Aggregate => (corpus.clone(), seed),
        Stratum::Group(g) => (group_slice(corpus, g, registry)?, mix_seed(seed, g)),
    };
    let (hate, non_hate): (Vec<usize>, Vec<usize>) =
        (0..source.examples.len()).partition(|&i| source.examples[i].gold_label.is_hate());
    if hate.is_empty() || non_hate.is_empty() {
        return Err(CorpusError::EmptyStratum(stratum.to_string()));
    }
    let target = hate.len().min(non_hate.len());
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let mut keep = vec![false; source.examples.len()];
    for class in [&hate, &non_hate] {
        if class.len() == target {
            class.iter().for_each(|&i| keep[i] = true);
        } else {
            for j in index::sample(&mut rng, class.len(), target) {
                keep[class[j]] = true;
            }
        }
    }
    let kept = source
        .examples
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(ex, _)| ex.clone())
        .collect();
    Ok(source.derive(kept, format!("balance({stratum}, seed={seed})")))
}

/// Derives an independent seed for a named sub-stream.
pub(crate) fn mix_seed(seed: u64, name: &str) -> u64 {
    let digest = sha256_hex(format!("{seed}:{name}"));
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}
