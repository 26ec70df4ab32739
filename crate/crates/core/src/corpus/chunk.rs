use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CorpusError, Document};

/// Maximum distance, in characters, a chunk boundary moves backward to land on
/// whitespace.
pub const SNAP_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkConfig {
    pub size: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            size: 1000,
            overlap: 200,
        }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.size == 0 || self.size <= self.overlap {
            return Err(CorpusError::ChunkConfig {
                size: self.size,
                overlap: self.overlap,
            });
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.size - self.overlap
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChunkRef {
    pub doc_id: String,
    pub index: usize,
}

impl ChunkRef {
    pub fn new(doc_id: impl Into<String>, index: usize) -> Self {
        Self {
            doc_id: doc_id.into(),
            index,
        }
    }
}

impl fmt::Display for ChunkRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.doc_id, self.index)
    }
}

/// A window of a document. `start` and `end` are character (not byte) offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Chunk {
    pub fn chunk_ref(&self) -> ChunkRef {
        ChunkRef::new(self.doc_id.clone(), self.index)
    }
}

/// A position is a word boundary when it does not sit between two
/// non-whitespace characters.
fn is_boundary(chars: &[char], pos: usize) -> bool {
    pos == 0
        || pos >= chars.len()
        || chars[pos - 1].is_whitespace()
        || chars[pos].is_whitespace()
}

/// Largest word boundary in `[max(lo, pos - SNAP_WINDOW), pos]`, or `pos`.
fn snap_back(chars: &[char], pos: usize, lo: usize) -> usize {
    let floor = pos.saturating_sub(SNAP_WINDOW).max(lo);
    (floor..=pos)
        .rev()
        .find(|&q| is_boundary(chars, q))
        .unwrap_or(pos)
}

/// Splits a document into overlapping character windows.
///
/// The nominal grid puts chunk `i` at `[i * stride, i * stride + size)`; each
/// interior boundary then moves back to the nearest whitespace within
/// [`SNAP_WINDOW`] characters, subject to keeping starts and ends strictly
/// increasing and leaving no gap between neighbours.
pub fn chunk_document(doc: &Document, config: ChunkConfig) -> Result<Vec<Chunk>, CorpusError> {
    config.validate()?;
    let chars: Vec<char> = doc.text.chars().collect();
    let len = chars.len();
    if len == 0 {
        return Ok(Vec::new());
    }
    let stride = config.stride();
    let count = if len <= config.size {
        1
    } else {
        (len - config.size).div_ceil(stride) + 1
    };

    let mut starts = Vec::with_capacity(count);
    for i in 0..count {
        let nominal = i * stride;
        let start = match starts.last() {
            None => 0,
            Some(&prev) => snap_back(&chars, nominal, prev + 1),
        };
        starts.push(start);
    }

    let mut ends = Vec::with_capacity(count);
    for i in 0..count {
        let nominal = (i * stride + config.size).min(len);
        let end = if i + 1 == count {
            len
        } else {
            let floor = starts[i + 1].max(ends.last().map_or(0, |&e: &usize| e + 1));
            snap_back(&chars, nominal, floor)
        };
        ends.push(end);
    }

    // char offsets -> byte offsets for slicing
    let mut byte_at: Vec<usize> = doc.text.char_indices().map(|(b, _)| b).collect();
    byte_at.push(doc.text.len());

    Ok(starts
        .into_iter()
        .zip(ends)
        .enumerate()
        .map(|(index, (start, end))| Chunk {
            doc_id: doc.id.clone(),
            index,
            start,
            end,
            text: doc.text[byte_at[start]..byte_at[end]].to_string(),
        })
        .collect())
}
