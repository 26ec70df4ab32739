//! Documents, JSONL corpus files, overlapping chunking and the synthetic
//! corpus generator.

mod chunk;
pub mod synthetic;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use chunk::{chunk_document, Chunk, ChunkConfig, ChunkRef, SNAP_WINDOW};
pub use synthetic::generate_synthetic_corpus;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("chunk size {size} must exceed overlap {overlap}")]
    ChunkConfig { size: usize, overlap: usize },
    #[error("positive rate {0} must lie in [0, 1]")]
    PositiveRate(f64),
}

/// A labelled text unit. `label` is the ground truth for "is a valid offer".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default, rename = "meta", skip_serializing_if = "BTreeMap::is_empty")]
    pub source_meta: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<u8>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
            source_meta: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: usize,
    pub n_positive: usize,
    pub positive_rate: f64,
}

pub fn corpus_stats(docs: &[Document]) -> CorpusStats {
    let n_docs = docs.len();
    let n_positive = docs.iter().filter(|d| d.label == Some(1)).count();
    let positive_rate = if n_docs == 0 {
        0.0
    } else {
        n_positive as f64 / n_docs as f64
    };
    CorpusStats {
        n_docs,
        n_positive,
        positive_rate,
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<Document, CorpusError> {
    let malformed = |message: String| CorpusError::Malformed {
        line: lineno,
        message,
    };
    let value: Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| malformed("expected a JSON object".into()))?;
    let id = match obj.get("id") {
        None | Some(Value::Null) => return Err(malformed("missing id".into())),
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => return Err(malformed("id must be a nonempty string".into())),
    };
    let text = match obj.get("text") {
        Some(Value::String(s)) => s.clone(),
        None => return Err(malformed("missing text".into())),
        Some(_) => return Err(malformed("text must be a string".into())),
    };
    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(v) => match v.as_u64() {
            Some(l @ (0 | 1)) => Some(l as u8),
            _ => return Err(malformed(format!("label must be 0 or 1, got {v}"))),
        },
    };
    let mut source_meta = BTreeMap::new();
    match obj.get("meta") {
        None | Some(Value::Null) => {}
        Some(Value::Object(m)) => {
            for (k, v) in m {
                let s = v
                    .as_str()
                    .ok_or_else(|| malformed(format!("meta value for `{k}` must be a string")))?;
                source_meta.insert(k.clone(), s.to_string());
            }
        }
        Some(_) => return Err(malformed("meta must be an object of strings".into())),
    }
    Ok(Document {
        id,
        text,
        label,
        source_meta,
    })
}

/// Reads a JSONL corpus. Blank lines are skipped; line numbers in errors are
/// 1-based.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>, CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    read_corpus(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { source, .. } => io_err(source),
        other => other,
    })
}

pub fn read_corpus(reader: impl BufRead) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: "<reader>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_line(&line, i + 1)?;
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId(doc.id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    for doc in docs {
        let line = serde_json::to_string(doc).expect("documents always serialize");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}
