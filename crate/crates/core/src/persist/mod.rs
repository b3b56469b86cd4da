//! Versioned binary model files and report writing.
//!
//! Byte layout of a model file:
//!
//! ```text
//! "AITD" | version: u32 LE | kind: u8 | header_len: u32 LE | header (UTF-8 JSON) | payload (f64 LE...)
//! ```
//!
//! The header carries dims, config, seed, provenance and the SHA-256 of the
//! payload bytes. Payload arrays are concatenated in a fixed per-kind order.

mod report;

pub use report::{
    comparison_table, write_report, MetricsBundle, ReportFiles, RocSummary, Timing, REPORT_JSON, REPORT_TEXT,
};

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bilstm::{BiLstmModel, Dims};
use crate::error::{Error, Result};
use crate::logreg::{LogRegModel, Penalty, TrainingMeta};
use crate::textproc::Vocab;
use crate::tfidf::TfidfModel;

pub const MAGIC: [u8; 4] = *b"AITD";
pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const PREAMBLE_LEN: usize = 4 + 4 + 1 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tfidf,
    Logreg,
    Bilstm,
}

impl ModelKind {
    pub fn tag(self) -> u8 {
        match self {
            ModelKind::Tfidf => 1,
            ModelKind::Logreg => 2,
            ModelKind::Bilstm => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(ModelKind::Tfidf),
            2 => Ok(ModelKind::Logreg),
            3 => Ok(ModelKind::Bilstm),
            t => Err(Error::Format(format!("unknown model kind tag {t}"))),
        }
    }
}

/// Where an artifact came from. Input hashes are keyed by a caller-chosen
/// name (typically the input file name).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub tool_version: String,
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(seed: u64) -> Self {
        Provenance {
            seed,
            tool_version: TOOL_VERSION.to_string(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn with_input(mut self, name: impl Into<String>, bytes: &[u8]) -> Self {
        self.inputs.insert(name.into(), sha256_hex(bytes));
        self
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: ModelKind,
    pub dims: Value,
    pub config: Value,
    pub seed: u64,
    pub payload_len: usize,
    pub content_sha256: String,
    pub provenance: Provenance,
}

/// A model kind that can be written to and read from a model file.
pub trait Persist: Sized {
    const KIND: ModelKind;

    /// (dims, config, payload) with the payload in declared order.
    fn to_parts(&self) -> (Value, Value, Vec<f64>);

    /// Rebuild from header fields and payload. Implementations must reject a
    /// payload whose length disagrees with `dims`.
    fn from_parts(dims: &Value, config: &Value, payload: Vec<f64>) -> Result<Self>;
}

fn field<T: DeserializeOwned>(v: &Value, name: &str) -> Result<T> {
    let raw = v
        .get(name)
        .ok_or_else(|| Error::Format(format!("header is missing '{name}'")))?;
    serde_json::from_value(raw.clone()).map_err(|e| Error::Format(format!("header field '{name}': {e}")))
}

fn expect_len(payload: &[f64], expected: usize, what: &str) -> Result<()> {
    if payload.len() != expected {
        return Err(Error::DimMismatch(format!(
            "{what}: declared dims need {expected} values, payload has {}",
            payload.len()
        )));
    }
    Ok(())
}

impl Persist for TfidfModel {
    const KIND: ModelKind = ModelKind::Tfidf;

    fn to_parts(&self) -> (Value, Value, Vec<f64>) {
        let dims = json!({ "features": self.dim(), "n_docs": self.n_docs });
        let config = json!({ "terms": self.vocab.terms() });
        (dims, config, self.idf.clone())
    }

    fn from_parts(dims: &Value, config: &Value, payload: Vec<f64>) -> Result<Self> {
        let features: usize = field(dims, "features")?;
        let n_docs: usize = field(dims, "n_docs")?;
        let terms: Vec<String> = field(config, "terms")?;
        expect_len(&payload, features, "tfidf")?;
        if terms.len() != features {
            return Err(Error::DimMismatch(format!(
                "tfidf: {} terms for {features} declared features",
                terms.len()
            )));
        }
        TfidfModel::from_parts(Vocab::from_terms(terms, f64::NAN)?, payload, n_docs)
    }
}

impl Persist for LogRegModel {
    const KIND: ModelKind = ModelKind::Logreg;

    fn to_parts(&self) -> (Value, Value, Vec<f64>) {
        let dims = json!({ "features": self.dim() });
        let config = json!({
            "penalty": self.penalty.to_string(),
            "C": self.c,
            "meta": self.meta,
        });
        let mut payload = self.weights.clone();
        payload.push(self.bias);
        (dims, config, payload)
    }

    fn from_parts(dims: &Value, config: &Value, mut payload: Vec<f64>) -> Result<Self> {
        let features: usize = field(dims, "features")?;
        expect_len(&payload, features + 1, "logreg")?;
        let penalty: String = field(config, "penalty")?;
        let penalty: Penalty = penalty.parse()?;
        let c: f64 = field(config, "C")?;
        let meta: TrainingMeta = field(config, "meta")?;
        let bias = payload.pop().expect("length checked");
        Ok(LogRegModel {
            weights: payload,
            bias,
            penalty,
            c,
            meta,
        })
    }
}

impl Persist for BiLstmModel {
    const KIND: ModelKind = ModelKind::Bilstm;

    fn to_parts(&self) -> (Value, Value, Vec<f64>) {
        let tensors: Vec<Value> = self
            .layout()
            .tensors()
            .into_iter()
            .map(|(name, r)| json!({ "name": name, "len": r.len() }))
            .collect();
        let dims = serde_json::to_value(self.dims()).expect("dims serialize");
        let config = json!({ "gate_order": crate::bilstm::GATE_ORDER, "tensors": tensors });
        (dims, config, self.params().to_vec())
    }

    fn from_parts(dims: &Value, _config: &Value, payload: Vec<f64>) -> Result<Self> {
        let dims: Dims =
            serde_json::from_value(dims.clone()).map_err(|e| Error::Format(format!("bilstm dims: {e}")))?;
        dims.validate()?;
        expect_len(&payload, crate::bilstm::Layout::new(&dims).total, "bilstm")?;
        BiLstmModel::from_params(dims, payload)
    }
}

/// Serialize a model to bytes.
pub fn to_bytes<M: Persist>(model: &M, provenance: &Provenance) -> Vec<u8> {
    let (dims, config, payload) = model.to_parts();
    let mut body = Vec::with_capacity(payload.len() * 8);
    for v in &payload {
        body.extend_from_slice(&v.to_le_bytes());
    }
    let header = Header {
        kind: M::KIND,
        dims,
        config,
        seed: provenance.seed,
        payload_len: payload.len(),
        content_sha256: sha256_hex(&body),
        provenance: provenance.clone(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(PREAMBLE_LEN + header.len() + body.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(M::KIND.tag());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&body);
    out
}

/// Parse and verify the framing, header and payload hash without building a
/// model.
pub fn read_header(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic: not a model file".into()));
    }
    if bytes.len() < PREAMBLE_LEN {
        return Err(Error::Format("truncated model file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported model file version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    let kind = ModelKind::from_tag(bytes[8])?;
    let header_len = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    let rest = &bytes[PREAMBLE_LEN..];
    if rest.len() < header_len {
        return Err(Error::Format("truncated model header".into()));
    }
    let header: Header = serde_json::from_slice(&rest[..header_len])
        .map_err(|e| Error::Format(format!("unreadable model header: {e}")))?;
    if header.kind != kind {
        return Err(Error::Format(format!(
            "kind tag {kind:?} disagrees with header kind {:?}",
            header.kind
        )));
    }
    let body = &rest[header_len..];
    if sha256_hex(body) != header.content_sha256 {
        return Err(Error::Format("content hash mismatch: payload is corrupted".into()));
    }
    if !body.len().is_multiple_of(8) || body.len() / 8 != header.payload_len {
        return Err(Error::DimMismatch(format!(
            "header declares {} payload values, found {} bytes",
            header.payload_len,
            body.len()
        )));
    }
    Ok((header, body))
}

/// Deserialize a model, checking kind, version, hash and dims.
pub fn from_bytes<M: Persist>(bytes: &[u8]) -> Result<(M, Header)> {
    let (header, body) = read_header(bytes)?;
    if header.kind != M::KIND {
        return Err(Error::Format(format!(
            "expected a {:?} model, file holds {:?}",
            M::KIND,
            header.kind
        )));
    }
    let payload: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let model = M::from_parts(&header.dims, &header.config, payload)?;
    Ok((model, header))
}

pub fn save<M: Persist>(model: &M, provenance: &Provenance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model, provenance)).map_err(|e| Error::io(path, e))
}

pub fn load<M: Persist>(path: impl AsRef<Path>) -> Result<(M, Header)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
