//! Line-delimited JSON index file.
//!
//! ```text
//! {"format":"tutor-vector-index","format_version":1,"dimension":256,"version":1,"entries":3}
//! {"chunk_id":"...","doc_id":"...","seq":0,"text":"...","embedding":[0.1, ...]}
//! ...
//! {"checksum":"sha256:<hex of every preceding byte>"}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CourseChunk, Embedding, KbError, VectorIndex};
use crate::scalar::Scalar;

pub const INDEX_FORMAT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "tutor-vector-index";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    format_version: u32,
    dimension: usize,
    version: u64,
    entries: usize,
}

#[derive(Serialize, Deserialize)]
struct Record {
    chunk_id: String,
    doc_id: String,
    seq: usize,
    text: String,
    embedding: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Trailer {
    checksum: String,
}

/// Serializes the index into its file representation.
pub fn write_index<S: Scalar>(index: &VectorIndex<S>) -> Vec<u8> {
    let mut out = Vec::new();
    let header = Header {
        format: FORMAT_TAG.into(),
        format_version: INDEX_FORMAT_VERSION,
        dimension: index.dimension(),
        version: index.version(),
        entries: index.len(),
    };
    push_line(&mut out, &header);
    for chunk in index.entries() {
        let record = Record {
            chunk_id: chunk.chunk_id.clone(),
            doc_id: chunk.doc_id.clone(),
            seq: chunk.seq,
            text: chunk.text.clone(),
            embedding: chunk
                .embedding
                .as_ref()
                .map(|e| e.as_slice().iter().map(|x| x.to_f64_lossy()).collect())
                .unwrap_or_default(),
        };
        push_line(&mut out, &record);
    }
    let trailer = Trailer {
        checksum: format!("sha256:{}", hex_digest(&out)),
    };
    push_line(&mut out, &trailer);
    out
}

pub fn read_index<S: Scalar>(bytes: &[u8]) -> Result<VectorIndex<S>, KbError> {
    let corrupt = |msg: &str| KbError::CorruptIndex(msg.to_string());
    let text = std::str::from_utf8(bytes).map_err(|_| corrupt("not UTF-8"))?;
    let body = text.strip_suffix('\n').ok_or_else(|| corrupt("truncated"))?;
    let (content, trailer_line) = match body.rfind('\n') {
        Some(pos) => (&text[..=pos], &body[pos + 1..]),
        None => return Err(corrupt("missing checksum line")),
    };
    let trailer: Trailer = serde_json::from_str(trailer_line).map_err(|_| corrupt("missing checksum line"))?;
    if trailer.checksum != format!("sha256:{}", hex_digest(content.as_bytes())) {
        return Err(corrupt("checksum mismatch"));
    }

    let mut lines = content.lines();
    let header: Header = lines
        .next()
        .and_then(|l| serde_json::from_str(l).ok())
        .ok_or_else(|| corrupt("bad header"))?;
    if header.format != FORMAT_TAG {
        return Err(corrupt("not an index file"));
    }
    if header.format_version != INDEX_FORMAT_VERSION {
        return Err(KbError::VersionUnsupported(header.format_version));
    }
    let mut entries = Vec::with_capacity(header.entries);
    for line in lines {
        let record: Record =
            serde_json::from_str(line).map_err(|e| KbError::CorruptIndex(format!("bad record: {e}")))?;
        let values = record.embedding.into_iter().map(S::from_f64_lossy).collect();
        entries.push(CourseChunk {
            chunk_id: record.chunk_id,
            doc_id: record.doc_id,
            seq: record.seq,
            text: record.text,
            embedding: Some(Embedding::new(values).map_err(|e| KbError::CorruptIndex(e.to_string()))?),
        });
    }
    if entries.len() != header.entries {
        return Err(corrupt("entry count does not match header"));
    }
    VectorIndex::from_parts(header.dimension, entries, header.version)
}

pub fn save_index<S: Scalar>(index: &VectorIndex<S>, path: &Path) -> Result<(), KbError> {
    let bytes = write_index(index);
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_index<S: Scalar>(path: &Path) -> Result<VectorIndex<S>, KbError> {
    read_index(&std::fs::read(path)?)
}

fn push_line<T: Serialize>(out: &mut Vec<u8>, value: &T) {
    // Plain structs of strings and numbers always serialize.
    serde_json::to_writer(&mut *out, value).expect("index record serializes");
    out.push(b'\n');
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
