use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{RetrievalError, TokenizedChunk};
use crate::corpus::ChunkRef;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Inverted index with Okapi BM25 statistics over a set of chunks.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    params: Bm25Params,
    doc_freqs: HashMap<String, usize>,
    /// term -> (chunk slot, term frequency)
    postings: HashMap<String, Vec<(usize, u32)>>,
    chunk_refs: Vec<ChunkRef>,
    chunk_lengths: Vec<usize>,
    slot_of: BTreeMap<ChunkRef, usize>,
    avg_len: f64,
}

impl Bm25Index {
    pub fn build(chunks: &[TokenizedChunk], params: Bm25Params) -> Result<Self, RetrievalError> {
        if params.k1.is_nan() || params.k1 < 0.0 || !(0.0..=1.0).contains(&params.b) {
            return Err(RetrievalError::Params {
                k1: params.k1,
                b: params.b,
            });
        }
        let mut doc_freqs: HashMap<String, usize> = HashMap::new();
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        let mut slot_of = BTreeMap::new();
        let mut chunk_refs = Vec::with_capacity(chunks.len());
        let mut chunk_lengths = Vec::with_capacity(chunks.len());

        for (slot, chunk) in chunks.iter().enumerate() {
            if slot_of.insert(chunk.chunk_ref.clone(), slot).is_some() {
                return Err(RetrievalError::DuplicateChunk(chunk.chunk_ref.clone()));
            }
            chunk_refs.push(chunk.chunk_ref.clone());
            chunk_lengths.push(chunk.tokens.len());
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in &chunk.tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (term, count) in tf {
                *doc_freqs.entry(term.to_string()).or_default() += 1;
                postings.entry(term.to_string()).or_default().push((slot, count));
            }
        }
        let total: usize = chunk_lengths.iter().sum();
        let avg_len = if chunk_lengths.is_empty() {
            0.0
        } else {
            total as f64 / chunk_lengths.len() as f64
        };
        Ok(Self {
            params,
            doc_freqs,
            postings,
            chunk_refs,
            chunk_lengths,
            slot_of,
            avg_len,
        })
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn len(&self) -> usize {
        self.chunk_refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunk_refs.is_empty()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freqs.get(term).copied().unwrap_or(0)
    }

    pub fn chunk_refs(&self) -> &[ChunkRef] {
        &self.chunk_refs
    }

    pub fn chunk_len(&self, chunk: &ChunkRef) -> Option<usize> {
        self.slot_of.get(chunk).map(|&s| self.chunk_lengths[s])
    }

    /// Smoothed IDF, strictly positive for every `df <= N`.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_frequency(&self, term: &str, slot: usize) -> u32 {
        self.postings
            .get(term)
            .and_then(|p| p.iter().find(|(s, _)| *s == slot))
            .map_or(0, |&(_, tf)| tf)
    }

    fn score_slot(&self, query_tokens: &[String], slot: usize) -> f64 {
        let len = self.chunk_lengths[slot] as f64;
        query_tokens
            .iter()
            .map(|term| {
                let tf = self.term_frequency(term, slot) as f64;
                term_score(self.params, self.idf(term), tf, len, self.avg_len)
            })
            .sum()
    }

    pub fn score(&self, query_tokens: &[String], chunk: &ChunkRef) -> Result<f64, RetrievalError> {
        let slot = *self
            .slot_of
            .get(chunk)
            .ok_or_else(|| RetrievalError::UnknownChunk(chunk.clone()))?;
        Ok(self.score_slot(query_tokens, slot))
    }

    /// Scores every indexed chunk, highest first, ties by chunk ref.
    pub fn rank(&self, query_tokens: &[String]) -> Vec<(ChunkRef, f64)> {
        let mut scored: Vec<(ChunkRef, f64)> = (0..self.len())
            .map(|slot| (self.chunk_refs[slot].clone(), self.score_slot(query_tokens, slot)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored
    }
}

/// Saturated, length-normalized contribution of one query term.
fn term_score(params: Bm25Params, idf: f64, tf: f64, len: f64, avg_len: f64) -> f64 {
    if tf == 0.0 {
        return 0.0;
    }
    let Bm25Params { k1, b } = params;
    let norm = if avg_len > 0.0 {
        1.0 - b + b * len / avg_len
    } else {
        1.0
    };
    idf * tf * (k1 + 1.0) / (tf + k1 * norm)
}

pub fn bm25_score(
    index: &Bm25Index,
    query_tokens: &[String],
    chunk: &ChunkRef,
) -> Result<f64, RetrievalError> {
    index.score(query_tokens, chunk)
}
