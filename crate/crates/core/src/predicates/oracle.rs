use std::collections::BTreeSet;

use super::{EstimateMethod, PredicateError, PredicateEstimate, PredicateKey};
use crate::corpus::synthetic::{META_FEATURES, META_SPAN_PREFIX, META_SYNTHETIC};
use crate::corpus::{chunk_document, ChunkConfig, Document};

/// Ground-truth predicate values of a generated document: 1 for every
/// predicate whose phrase the generator inserted, 0 otherwise. Evidence points
/// at the chunks overlapping the inserted phrase.
pub fn oracle_estimates(doc: &Document, chunking: ChunkConfig) -> Result<Vec<PredicateEstimate>, PredicateError> {
    if doc.source_meta.get(META_SYNTHETIC).map(String::as_str) != Some("true") {
        return Err(PredicateError::NotSynthetic(doc.id.clone()));
    }
    let meta_err = |message: String| PredicateError::SyntheticMeta {
        doc: doc.id.clone(),
        message,
    };
    let features = doc
        .source_meta
        .get(META_FEATURES)
        .ok_or_else(|| meta_err(format!("missing `{META_FEATURES}`")))?;
    let present: BTreeSet<PredicateKey> = features
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let chunks = chunk_document(doc, chunking)?;

    let mut out = Vec::with_capacity(PredicateKey::ALL.len());
    for key in PredicateKey::ALL {
        let mut est = PredicateEstimate::scalar(doc.id.clone(), key, EstimateMethod::Oracle, 0.0);
        if present.contains(&key) {
            est.value = 1.0;
            let span_key = format!("{META_SPAN_PREFIX}{key}");
            let span = doc
                .source_meta
                .get(&span_key)
                .ok_or_else(|| meta_err(format!("missing `{span_key}`")))?;
            let (s, e) = span
                .split_once(':')
                .and_then(|(s, e)| Some((s.parse::<usize>().ok()?, e.parse::<usize>().ok()?)))
                .ok_or_else(|| meta_err(format!("bad span `{span}`")))?;
            est.evidence_chunks = chunks
                .iter()
                .filter(|c| c.start < e && s < c.end)
                .map(|c| c.chunk_ref())
                .collect();
        }
        out.push(est);
    }
    Ok(out)
}
