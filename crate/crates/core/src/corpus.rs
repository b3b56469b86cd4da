//! Labeled text corpora: JSONL/CSV ingest, cleaning, and summary counts.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Binary class. Human text is 0, AI-generated text is 1 (the positive class).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Human = 0,
    Ai = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }

    /// Coerce a textual label. Accepted (case-insensitive, trimmed):
    /// `0`, `0.0`, `human`, `false` for human and `1`, `1.0`, `ai`, `true`
    /// for AI.
    pub fn coerce(raw: &str) -> Option<Label> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "0" | "0.0" | "human" | "false" => Some(Label::Human),
            "1" | "1.0" | "ai" | "true" => Some(Label::Ai),
            _ => None,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Human),
            1 => Ok(Label::Ai),
            other => Err(format!("label {other} is not in {{0,1}}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// One text sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub source: String,
}

impl Record {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label, source: impl Into<String>) -> Self {
        Record {
            id: id.into(),
            text: text.into(),
            label,
            source: source.into(),
        }
    }
}

/// Ordered collection of records with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<Record>,
    provenance: String,
}

impl Corpus {
    pub fn new(records: Vec<Record>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::invalid(format!("duplicate record id {:?}", r.id)));
            }
        }
        Ok(Corpus {
            records,
            provenance: provenance.into(),
        })
    }

    pub fn empty(provenance: impl Into<String>) -> Self {
        Corpus {
            records: Vec::new(),
            provenance: provenance.into(),
        }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Record> {
        self.records.iter()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.text.as_str())
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Record counts per source, in source-name order.
    pub fn source_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.source.clone()).or_insert(0) += 1;
        }
        out
    }

    /// Concatenate corpora in the given order. Ids that collide with an
    /// earlier record get a `#<n>` suffix; the colliding original ids are
    /// returned.
    pub fn merge(parts: Vec<Corpus>) -> (Corpus, Vec<String>) {
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut collisions = Vec::new();
        let mut records = Vec::new();
        let mut provenance = Vec::new();
        for part in parts {
            provenance.push(part.provenance);
            for mut r in part.records {
                let n = seen.entry(r.id.clone()).or_insert(0);
                *n += 1;
                if *n > 1 {
                    collisions.push(r.id.clone());
                    let mut k = *n;
                    loop {
                        let candidate = format!("{}#{}", r.id, k);
                        if !seen.contains_key(&candidate) {
                            seen.insert(candidate.clone(), 1);
                            r.id = candidate;
                            break;
                        }
                        k += 1;
                    }
                }
                records.push(r);
            }
        }
        let corpus = Corpus {
            records,
            provenance: provenance.join(" + "),
        };
        (corpus, collisions)
    }

    /// Subset in corpus order.
    pub fn filter(&self, mut keep: impl FnMut(&Record) -> bool, provenance: impl Into<String>) -> Corpus {
        Corpus {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            provenance: provenance.into(),
        }
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Record;
    type IntoIter = std::slice::Iter<'a, Record>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Load a JSONL corpus. A `null` text is kept as an empty string so that
/// [`clean`] drops and counts it; a missing `text` key is an error.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fname = file_label(path);
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in content.lines().enumerate() {
        let lineno = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(line).map_err(|e| Error::parse(path, lineno, format!("malformed JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::parse(path, lineno, "expected a JSON object"))?;

        let text = match obj.get("text") {
            None => return Err(Error::parse(path, lineno, "missing \"text\" key")),
            Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(Error::parse(path, lineno, "\"text\" must be a string or null")),
        };
        let label = match obj.get("label") {
            None => return Err(Error::parse(path, lineno, "missing \"label\" key")),
            Some(v) => v
                .as_u64()
                .and_then(|n| u8::try_from(n).ok())
                .and_then(|n| Label::try_from(n).ok())
                .ok_or_else(|| Error::parse(path, lineno, format!("label {v} is not 0 or 1")))?,
        };
        let source = match obj.get("source") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
            Some(_) => return Err(Error::parse(path, lineno, "\"source\" must be a non-empty string")),
            None => return Err(Error::parse(path, lineno, "missing \"source\" key")),
        };
        let id = match obj.get("id") {
            None | Some(Value::Null) => format!("{fname}:{lineno}"),
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(_) => return Err(Error::parse(path, lineno, "\"id\" must be a string")),
        };
        if !seen.insert(id.clone()) {
            return Err(Error::parse(path, lineno, format!("duplicate id {id:?}")));
        }
        records.push(Record {
            id,
            text,
            label,
            source,
        });
    }
    Ok(Corpus {
        records,
        provenance: path.display().to_string(),
    })
}

/// Header names for the text/label/source columns (and optionally an id column).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub text: String,
    pub label: String,
    pub source: String,
    #[serde(default)]
    pub id: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            text: "text".into(),
            label: "label".into(),
            source: "source".into(),
            id: None,
        }
    }
}

// The csv reader silently consumes an unterminated quoted field up to EOF,
// so unbalanced quotes are detected up front. Returns the 1-based line on
// which the dangling quote opened.
fn find_unbalanced_quote(bytes: &[u8]) -> Option<u64> {
    let mut in_quotes = false;
    let mut line = 1u64;
    let mut opened_at = 0u64;
    for &b in bytes {
        match b {
            b'"' => {
                in_quotes = !in_quotes;
                if in_quotes {
                    opened_at = line;
                }
            }
            b'\n' => line += 1,
            _ => {}
        }
    }
    in_quotes.then_some(opened_at)
}

/// Load an RFC-4180 CSV corpus with a header row.
pub fn load_csv(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<Corpus> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if let Some(line) = find_unbalanced_quote(&bytes) {
        return Err(Error::parse(path, line, "unbalanced quote"));
    }
    let fname = file_label(path);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes.as_slice());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(path, 1, format!("missing mapped column {name:?}")))
    };
    let text_col = col(&columns.text)?;
    let label_col = col(&columns.label)?;
    let source_col = col(&columns.source)?;
    let id_col = columns.id.as_deref().map(col).transpose()?;

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            let msg = match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("row has {len} fields, header has {expected_len}")
                }
                _ => e.to_string(),
            };
            Error::parse(path, line, msg)
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let raw_label = &row[label_col];
        let label = Label::coerce(raw_label)
            .ok_or_else(|| Error::parse(path, line, format!("label {raw_label:?} is not a recognised class")))?;
        let source = row[source_col].to_string();
        if source.trim().is_empty() {
            return Err(Error::parse(path, line, "empty source"));
        }
        let id = match id_col {
            Some(c) if !row[c].is_empty() => row[c].to_string(),
            _ => format!("{fname}:{line}"),
        };
        if !seen.insert(id.clone()) {
            return Err(Error::parse(path, line, format!("duplicate id {id:?}")));
        }
        records.push(Record {
            id,
            text: row[text_col].to_string(),
            label,
            source,
        });
    }
    Ok(Corpus {
        records,
        provenance: path.display().to_string(),
    })
}

/// Write records as JSONL in corpus order.
pub fn write_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in corpus {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Result of [`clean`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cleaned {
    pub corpus: Corpus,
    pub dropped: usize,
}

fn normalize_text(text: &str) -> String {
    let mut s = text.to_string();
    while s.contains("\r\n") {
        s = s.replace("\r\n", "\n");
    }
    s.trim().to_string()
}

/// Drop empty/whitespace-only (or null) texts, normalize CRLF to LF, trim.
pub fn clean(corpus: &Corpus) -> Cleaned {
    let mut dropped = 0;
    let mut records = Vec::with_capacity(corpus.len());
    for r in corpus {
        let text = normalize_text(&r.text);
        if text.is_empty() {
            dropped += 1;
            continue;
        }
        records.push(Record { text, ..r.clone() });
    }
    Cleaned {
        corpus: Corpus {
            records,
            provenance: corpus.provenance.clone(),
        },
        dropped,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub human: usize,
    pub ai: usize,
}

impl LabelCounts {
    pub fn total(&self) -> usize {
        self.human + self.ai
    }

    pub fn human_ratio(&self) -> f64 {
        ratio(self.human, self.total())
    }

    pub fn ai_ratio(&self) -> f64 {
        ratio(self.ai, self.total())
    }

    fn add(&mut self, label: Label) {
        match label {
            Label::Human => self.human += 1,
            Label::Ai => self.ai += 1,
        }
    }
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Per-label and per-source counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub labels: LabelCounts,
    pub sources: BTreeMap<String, LabelCounts>,
}

impl CorpusStats {
    pub fn source_count(&self) -> usize {
        self.sources.len()
    }

    /// Fixed-width text table, one row per source plus a total row.
    pub fn to_table(&self) -> String {
        let width = self.sources.keys().map(|k| k.chars().count()).max().unwrap_or(0).max(6);
        let mut out = format!(
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>7}  {:>7}\n",
            "source", "records", "human", "ai", "human%", "ai%"
        );
        let mut row = |name: &str, c: &LabelCounts| {
            out.push_str(&format!(
                "{:<width$}  {:>8}  {:>8}  {:>8}  {:>6.1}%  {:>6.1}%\n",
                name,
                c.total(),
                c.human,
                c.ai,
                c.human_ratio() * 100.0,
                c.ai_ratio() * 100.0
            ));
        };
        for (name, c) in &self.sources {
            row(name, c);
        }
        row("TOTAL", &self.labels);
        out
    }
}

pub fn stats(corpus: &Corpus) -> CorpusStats {
    let mut s = CorpusStats::default();
    for r in corpus {
        s.total += 1;
        s.labels.add(r.label);
        s.sources.entry(r.source.clone()).or_default().add(r.label);
    }
    s
}
