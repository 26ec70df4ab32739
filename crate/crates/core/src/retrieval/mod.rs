//! Predicate-specific chunk retrieval: BM25 lexical ranking followed by a
//! re-ranking stage.

mod bm25;
mod rerank;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bm25::{bm25_score, Bm25Index, Bm25Params};
pub use rerank::{jaccard_rerank, CrossEncoderReranker, JaccardReranker, RerankError, Reranker};

use crate::corpus::{Chunk, ChunkRef};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("invalid BM25 parameters k1={k1}, b={b}")]
    Params { k1: f64, b: f64 },
    #[error("chunk {0} is not indexed")]
    UnknownChunk(ChunkRef),
    #[error("chunk {0} indexed twice")]
    DuplicateChunk(ChunkRef),
    #[error("top_final ({top_final}) exceeds top_lexical ({top_lexical})")]
    Cutoffs { top_lexical: usize, top_final: usize },
}

/// Lowercased maximal runs of Unicode letters and digits. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedChunk {
    pub chunk_ref: ChunkRef,
    pub tokens: Vec<String>,
}

impl TokenizedChunk {
    pub fn from_chunk(chunk: &Chunk) -> Self {
        Self {
            chunk_ref: chunk.chunk_ref(),
            tokens: tokenize(&chunk.text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalParams {
    pub top_lexical: usize,
    pub top_final: usize,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            top_lexical: 20,
            top_final: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chunk_ref: ChunkRef,
    pub lexical_score: f64,
    pub rerank_score: f64,
    pub final_rank: usize,
    /// Set when the reranker failed on this chunk and lexical order was used.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rerank_failed: bool,
}

/// An index over one document's chunks together with the chunk texts the
/// reranker needs.
pub struct ChunkSet {
    index: Bm25Index,
    chunks: Vec<Chunk>,
    tokens: Vec<Vec<String>>,
}

impl ChunkSet {
    pub fn new(chunks: Vec<Chunk>, params: Bm25Params) -> Result<Self, RetrievalError> {
        let tokenized: Vec<TokenizedChunk> = chunks.iter().map(TokenizedChunk::from_chunk).collect();
        let index = Bm25Index::build(&tokenized, params)?;
        let tokens = tokenized.into_iter().map(|t| t.tokens).collect();
        Ok(Self {
            index,
            chunks,
            tokens,
        })
    }

    pub fn index(&self) -> &Bm25Index {
        &self.index
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn chunk(&self, r: &ChunkRef) -> Option<&Chunk> {
        self.chunks
            .iter()
            .find(|c| c.doc_id == r.doc_id && c.index == r.index)
    }

    fn position(&self, r: &ChunkRef) -> Option<usize> {
        self.chunks
            .iter()
            .position(|c| c.doc_id == r.doc_id && c.index == r.index)
    }

    /// BM25 ranks every chunk; the best `top_lexical` are re-scored by the
    /// reranker and the best `top_final` are returned ordered by
    /// (rerank desc, lexical desc, chunk ref asc).
    pub fn retrieve(
        &self,
        query: &str,
        reranker: &dyn Reranker,
        params: RetrievalParams,
    ) -> Result<Vec<RetrievalResult>, RetrievalError> {
        if params.top_final > params.top_lexical {
            return Err(RetrievalError::Cutoffs {
                top_lexical: params.top_lexical,
                top_final: params.top_final,
            });
        }
        let query_tokens = tokenize(query);
        let mut results: Vec<RetrievalResult> = self
            .index
            .rank(&query_tokens)
            .into_iter()
            .take(params.top_lexical)
            .map(|(chunk_ref, lexical_score)| {
                let pos = self.position(&chunk_ref).expect("ranked chunks are indexed");
                let (rerank_score, rerank_failed) =
                    match reranker.score(query, &query_tokens, &self.chunks[pos].text, &self.tokens[pos]) {
                        Ok(s) => (s.clamp(0.0, 1.0), false),
                        Err(_) => (0.0, true),
                    };
                RetrievalResult {
                    chunk_ref,
                    lexical_score,
                    rerank_score,
                    final_rank: 0,
                    rerank_failed,
                }
            })
            .collect();
        results.sort_by(|a, b| {
            b.rerank_score
                .total_cmp(&a.rerank_score)
                .then_with(|| b.lexical_score.total_cmp(&a.lexical_score))
                .then_with(|| a.chunk_ref.cmp(&b.chunk_ref))
        });
        results.truncate(params.top_final);
        for (rank, r) in results.iter_mut().enumerate() {
            r.final_rank = rank;
        }
        Ok(results)
    }
}

/// Distinct tokens, for set-based scoring.
pub(crate) fn token_set(tokens: &[String]) -> BTreeSet<&str> {
    tokens.iter().map(String::as_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("Angebot Nr. 42"), vec!["angebot", "nr", "42"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Zahlungs-Bedingungen"), vec!["zahlungs", "bedingungen"]);
        assert_eq!(tokenize("Gültig BIS: 31.12."), vec!["gültig", "bis", "31", "12"]);
    }

    fn toy() -> ChunkSet {
        let chunks = ["angebot preis", "rechnung", "angebot angebot gültig"]
            .iter()
            .enumerate()
            .map(|(i, t)| Chunk {
                doc_id: "d".into(),
                index: i,
                start: 0,
                end: t.chars().count(),
                text: t.to_string(),
            })
            .collect();
        ChunkSet::new(chunks, Bm25Params::default()).unwrap()
    }

    struct Constant;
    impl Reranker for Constant {
        fn score(&self, _: &str, _: &[String], _: &str, _: &[String]) -> Result<f64, RerankError> {
            Ok(0.5)
        }
    }

    struct Failing;
    impl Reranker for Failing {
        fn score(&self, _: &str, _: &[String], _: &str, _: &[String]) -> Result<f64, RerankError> {
            Err(RerankError::Backend("down".into()))
        }
    }

    #[test]
    fn truncates_to_top_final() {
        let set = toy();
        let r = set
            .retrieve("angebot", &JaccardReranker, RetrievalParams { top_lexical: 20, top_final: 2 })
            .unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].final_rank, 0);
    }

    #[test]
    fn equal_rerank_scores_keep_lexical_order() {
        let set = toy();
        let lexical: Vec<ChunkRef> = set.index().rank(&tokenize("angebot")).into_iter().map(|(c, _)| c).collect();
        let r = set
            .retrieve("angebot", &Constant, RetrievalParams { top_lexical: 3, top_final: 3 })
            .unwrap();
        let got: Vec<ChunkRef> = r.into_iter().map(|x| x.chunk_ref).collect();
        assert_eq!(got, lexical);
    }

    #[test]
    fn jaccard_picks_third_chunk() {
        let set = toy();
        let r = set
            .retrieve("angebot gültig", &JaccardReranker, RetrievalParams::default())
            .unwrap();
        assert_eq!(r[0].chunk_ref, ChunkRef::new("d", 2));
        assert!((r[0].rerank_score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reranker_failure_falls_back_to_lexical_order() {
        let set = toy();
        let r = set
            .retrieve("angebot", &Failing, RetrievalParams { top_lexical: 3, top_final: 3 })
            .unwrap();
        assert!(r.iter().all(|x| x.rerank_failed));
        assert_eq!(r[0].chunk_ref, ChunkRef::new("d", 2));
    }

    #[test]
    fn cutoff_precondition() {
        let set = toy();
        assert!(set
            .retrieve("x", &JaccardReranker, RetrievalParams { top_lexical: 1, top_final: 2 })
            .is_err());
    }

    #[test]
    fn retrieval_is_deterministic_on_real_text() {
        let doc = Document::new("x", "Angebot Nr. 5\nZahlungsbedingungen 30 Tage netto. ".repeat(40), None);
        let chunks = crate::corpus::chunk_document(&doc, Default::default()).unwrap();
        let set = ChunkSet::new(chunks, Bm25Params::default()).unwrap();
        let a = set.retrieve("zahlungsbedingungen skonto", &JaccardReranker, RetrievalParams::default()).unwrap();
        let b = set.retrieve("zahlungsbedingungen skonto", &JaccardReranker, RetrievalParams::default()).unwrap();
        assert_eq!(a, b);
    }
}
