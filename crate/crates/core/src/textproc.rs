//! Tokenization, stop words, n-grams, vocabularies, and integer encoding.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_TERM: &str = "<pad>";
pub const UNK_TERM: &str = "<unk>";

const MIN_TOKEN_CHARS: usize = 2;

const STOPWORDS_EN: &str = include_str!("../resources/stopwords_en.txt");

/// Lowercase, then split into maximal runs of alphanumeric characters,
/// keeping tokens of at least two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= MIN_TOKEN_CHARS)
        .map(str::to_string)
        .collect()
}

/// The bundled 179-term English stop-word list.
pub fn english_stopwords() -> &'static HashSet<String> {
    static SET: OnceLock<HashSet<String>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_EN
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect()
    })
}

/// SHA-256 of the bundled stop-word resource, recorded in reports.
pub fn stopwords_sha256() -> String {
    hex::encode(Sha256::digest(STOPWORDS_EN.as_bytes()))
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &HashSet<String>) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

/// All contiguous n-grams for n in `lo..=hi`, space-joined, ordered by
/// (start position, n).
pub fn ngrams(tokens: &[String], lo: usize, hi: usize) -> Result<Vec<String>> {
    if lo == 0 || lo > hi {
        return Err(Error::invalid(format!("invalid n-gram range ({lo},{hi})")));
    }
    let mut out = Vec::with_capacity(tokens.len() * (hi - lo + 1));
    for start in 0..tokens.len() {
        for n in lo..=hi {
            if start + n > tokens.len() {
                break;
            }
            out.push(tokens[start..start + n].join(" "));
        }
    }
    Ok(out)
}

/// TF-IDF analyzer: tokenize, drop stop words, then form uni- and bigrams.
pub fn lexical_terms(text: &str) -> Vec<String> {
    let tokens = remove_stopwords(tokenize(text), english_stopwords());
    ngrams(&tokens, 1, 2).expect("(1,2) is a valid range")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    coverage: f64,
    specials: bool,
}

impl Vocab {
    fn from_parts(terms: Vec<String>, coverage: f64, specials: bool) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocab {
            terms,
            index,
            coverage,
            specials,
        }
    }

    /// Plain vocabulary from an already-ranked term list.
    pub fn from_terms(terms: Vec<String>, coverage: f64) -> Result<Self> {
        Self::checked(terms, coverage, false)
    }

    /// Neural vocabulary: `terms` excludes the PAD/UNK placeholders, which
    /// are prepended at ranks 0 and 1.
    pub fn with_specials(terms: Vec<String>, coverage: f64) -> Result<Self> {
        let mut all = Vec::with_capacity(terms.len() + 2);
        all.push(PAD_TERM.to_string());
        all.push(UNK_TERM.to_string());
        all.extend(terms);
        Self::checked(all, coverage, true)
    }

    fn checked(terms: Vec<String>, coverage: f64, specials: bool) -> Result<Self> {
        let v = Self::from_parts(terms, coverage, specials);
        if v.index.len() != v.terms.len() {
            return Err(Error::invalid("vocabulary terms are not unique"));
        }
        Ok(v)
    }

    /// Total size including the reserved ranks, if any.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Terms excluding the PAD/UNK placeholders.
    pub fn real_terms(&self) -> &[String] {
        if self.specials {
            &self.terms[2..]
        } else {
            &self.terms
        }
    }

    pub fn get(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn has_specials(&self) -> bool {
        self.specials
    }

    /// `#vocab v1 size=<n> specials=<0|2>` header, then one term per line.
    pub fn to_file_string(&self) -> String {
        let mut s = format!(
            "#vocab v1 size={} specials={}\n",
            self.len(),
            if self.specials { 2 } else { 0 }
        );
        for t in &self.terms {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_file_string(content: &str) -> Result<Self> {
        let mut lines = content.lines();
        let header = lines.next().ok_or_else(|| Error::invalid("empty vocabulary file"))?;
        let mut size = None;
        let mut specials = None;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("#vocab") || fields.next() != Some("v1") {
            return Err(Error::invalid(format!("bad vocabulary header {header:?}")));
        }
        for f in fields {
            if let Some(v) = f.strip_prefix("size=") {
                size = v.parse::<usize>().ok();
            } else if let Some(v) = f.strip_prefix("specials=") {
                specials = match v {
                    "0" => Some(false),
                    "2" => Some(true),
                    _ => None,
                };
            }
        }
        let (size, specials) = size
            .zip(specials)
            .ok_or_else(|| Error::invalid(format!("bad vocabulary header {header:?}")))?;
        let terms: Vec<String> = lines.map(str::to_string).collect();
        if terms.len() != size {
            return Err(Error::invalid(format!(
                "vocabulary header says {size} terms, file has {}",
                terms.len()
            )));
        }
        if specials && (terms.len() < 2 || terms[0] != PAD_TERM || terms[1] != UNK_TERM) {
            return Err(Error::invalid("vocabulary declares specials but lacks <pad>/<unk>"));
        }
        // coverage is a fit-time statistic and is not persisted
        Self::checked(terms, f64::NAN, specials)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_file_string(&s)
    }
}

/// Occurrence counts summed over documents.
pub fn term_counts<S: AsRef<str> + Sync>(docs: &[Vec<S>]) -> HashMap<String, u64> {
    docs.par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, u64>, doc| {
            for t in doc {
                *acc.entry(t.as_ref().to_string()).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        })
}

/// Rank terms by total occurrence count (desc), ties by term (asc), keep
/// the top `max_size` (minus the two reserved ranks with `reserve_special`).
pub fn build_vocab<S: AsRef<str> + Sync>(docs: &[Vec<S>], max_size: usize, reserve_special: bool) -> Result<Vocab> {
    if max_size == 0 {
        return Err(Error::invalid("max vocabulary size must be at least 1"));
    }
    let counts = term_counts(docs);
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::invalid("cannot build a vocabulary from an empty corpus"));
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let keep = if reserve_special {
        max_size.saturating_sub(2)
    } else {
        max_size
    };
    ranked.truncate(keep);
    let covered: u64 = ranked.iter().map(|(_, c)| c).sum();
    let coverage = covered as f64 / total as f64;
    let terms = ranked.into_iter().map(|(t, _)| t).collect();
    if reserve_special {
        Vocab::with_specials(terms, coverage)
    } else {
        Vocab::from_terms(terms, coverage)
    }
}

/// Fixed-length id sequence plus the number of real (non-PAD) positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub ids: Vec<u32>,
    pub len: usize,
}

/// Map tokens to ranks (unknown → UNK), keep the first `max_len`, pad the
/// tail with PAD.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocab, max_len: usize) -> Result<Encoded> {
    if !vocab.has_specials() {
        return Err(Error::invalid("encoding requires a vocabulary with PAD/UNK ranks"));
    }
    let len = tokens.len().min(max_len);
    let mut ids = Vec::with_capacity(max_len);
    ids.extend(tokens[..len].iter().map(|t| vocab.get(t.as_ref()).unwrap_or(UNK_ID)));
    ids.resize(max_len, PAD_ID);
    Ok(Encoded { ids, len })
}
