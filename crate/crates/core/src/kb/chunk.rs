use serde::{Deserialize, Serialize};

use super::{chunk_id, CourseChunk, CourseDocument, KbError};

/// Character budget for chunking. Sizes count Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingPolicy {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl Default for ChunkingPolicy {
    fn default() -> Self {
        Self {
            chunk_size: 1200,
            overlap: 200,
        }
    }
}

impl ChunkingPolicy {
    pub fn new(chunk_size: usize, overlap: usize) -> Result<Self, KbError> {
        let policy = Self { chunk_size, overlap };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), KbError> {
        if self.chunk_size == 0 || self.overlap >= self.chunk_size {
            return Err(KbError::InvalidPolicy {
                chunk_size: self.chunk_size,
                overlap: self.overlap,
            });
        }
        Ok(())
    }
}

/// Splits a document into overlapping chunks.
///
/// The body is first partitioned greedily into segments of at most
/// `chunk_size` characters, cutting at the last paragraph break in the
/// window, else the last sentence end, else the last line break, else at the
/// budget. Each chunk after the first is then prefixed with up to `overlap`
/// characters preceding its segment. Stripping that prefix from every chunk
/// and concatenating restores the body exactly (see [`reconstruct_body`]).
pub fn chunk_document<S>(doc: &CourseDocument, policy: &ChunkingPolicy) -> Result<Vec<CourseChunk<S>>, KbError> {
    policy.validate()?;
    if doc.body.trim().is_empty() {
        return Err(KbError::EmptyDocument(doc.doc_id.clone()));
    }
    let chars: Vec<char> = doc.body.chars().collect();
    let chunks = segment_bounds(&chars, policy.chunk_size)
        .into_iter()
        .enumerate()
        .map(|(seq, (start, end))| {
            let from = start - policy.overlap.min(start);
            CourseChunk {
                chunk_id: chunk_id(&doc.doc_id, seq),
                doc_id: doc.doc_id.clone(),
                seq,
                text: chars[from..end].iter().collect(),
                embedding: None,
            }
        })
        .collect();
    Ok(chunks)
}

/// Inverse of [`chunk_document`] for chunks of one document in `seq` order.
pub fn reconstruct_body<S>(chunks: &[CourseChunk<S>], policy: &ChunkingPolicy) -> String {
    let mut body = String::new();
    let mut len = 0usize;
    for chunk in chunks {
        let skip = policy.overlap.min(len);
        for c in chunk.text.chars().skip(skip) {
            body.push(c);
            len += 1;
        }
    }
    body
}

fn segment_bounds(chars: &[char], budget: usize) -> Vec<(usize, usize)> {
    let mut bounds = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let limit = start + budget;
        if limit >= chars.len() {
            bounds.push((start, chars.len()));
            break;
        }
        let cut = last_cut(chars, start, limit, is_paragraph_break)
            .or_else(|| last_cut(chars, start, limit, is_sentence_end))
            .or_else(|| last_cut(chars, start, limit, is_line_break))
            .unwrap_or(limit);
        bounds.push((start, cut));
        start = cut;
    }
    bounds
}

/// Largest cut position `i` in `(start, limit]` accepted by `at`.
fn last_cut(chars: &[char], start: usize, limit: usize, at: fn(&[char], usize) -> bool) -> Option<usize> {
    (start + 1..=limit).rev().find(|&i| at(chars, i))
}

// Cut positions sit just after the boundary characters.
fn is_paragraph_break(chars: &[char], i: usize) -> bool {
    i >= 2 && chars[i - 1] == '\n' && chars[i - 2] == '\n'
}

fn is_sentence_end(chars: &[char], i: usize) -> bool {
    i >= 2 && chars[i - 1].is_whitespace() && matches!(chars[i - 2], '.' | '!' | '?')
}

fn is_line_break(chars: &[char], i: usize) -> bool {
    i >= 1 && chars[i - 1] == '\n'
}
