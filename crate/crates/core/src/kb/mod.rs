//! Knowledge base: course documents, chunking, embedding and the persistent
//! vector index that retrieval scans.

mod chunk;
mod embed;
mod index;
mod materials;
mod persist;

pub use chunk::{chunk_document, reconstruct_body, ChunkingPolicy};
pub use embed::{
    embed_text, fnv1a_64, is_stopword, word_tokens, EmbeddingProvider, OfflineEmbedder, OFFLINE_DIMENSION, STOPWORDS,
};
pub use index::{build_index, VectorIndex};
pub use materials::{infer_kind, load_materials};
pub use persist::{load_index, read_index, save_index, write_index, INDEX_FORMAT_VERSION};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::ProviderError;
use crate::scalar::{self, Scalar};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("document `{0}` has no content")]
    EmptyDocument(String),
    #[error("invalid chunking policy: overlap {overlap} must be smaller than chunk size {chunk_size}")]
    InvalidPolicy { chunk_size: usize, overlap: usize },
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedding is not unit length (norm {norm})")]
    NotUnitNorm { norm: f64 },
    #[error("duplicate chunk `{0}`")]
    DuplicateChunk(String),
    #[error("corrupt index file: {0}")]
    CorruptIndex(String),
    #[error("unsupported index format version {0}")]
    VersionUnsupported(u32),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What a piece of course material is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    Slides,
    CodeExample,
    Assignment,
    ExplanatoryText,
}

/// A plain-text course document, markup already stripped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseDocument {
    pub doc_id: String,
    pub title: String,
    pub kind: DocumentKind,
    pub body: String,
    pub source_path: String,
}

/// Unit-length embedding vector.
#[derive(Clone, PartialEq)]
pub struct Embedding<S>(Vec<S>);

impl<S: Scalar> Embedding<S> {
    /// Wraps a vector that is already unit length.
    pub fn new(values: Vec<S>) -> Result<Self, KbError> {
        if !scalar::is_unit(&values) {
            return Err(KbError::NotUnitNorm {
                norm: scalar::l2_norm(&values).to_f64_lossy(),
            });
        }
        Ok(Self(values))
    }

    /// Scales a non-zero vector to unit length.
    pub fn normalized(mut values: Vec<S>) -> Option<Self> {
        scalar::normalize_in_place(&mut values).then_some(Self(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<S> {
        self.0
    }
}

impl<S> fmt::Debug for Embedding<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Embedding(dim={})", self.0.len())
    }
}

/// A fragment of a course document; the unit of retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct CourseChunk<S> {
    pub chunk_id: String,
    pub doc_id: String,
    pub seq: usize,
    pub text: String,
    pub embedding: Option<Embedding<S>>,
}

/// Chunk ids are derived from the parent document and position only.
pub fn chunk_id(doc_id: &str, seq: usize) -> String {
    format!("{doc_id}#{seq:04}")
}
