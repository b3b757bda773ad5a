use std::collections::HashSet;

use super::{embed_text, CourseChunk, EmbeddingProvider, KbError};
use crate::scalar::Scalar;

/// Exact, in-memory cosine index over embedded chunks.
///
/// Every entry carries an embedding of `dimension`. `version` increases on
/// each mutation so callers can tell index generations apart.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex<S> {
    dimension: usize,
    entries: Vec<CourseChunk<S>>,
    version: u64,
}

impl<S: Scalar> VectorIndex<S> {
    pub fn empty(dimension: usize) -> Self {
        Self {
            dimension,
            entries: Vec::new(),
            version: 0,
        }
    }

    /// Assembles an index from fully embedded chunks.
    pub fn from_parts(dimension: usize, entries: Vec<CourseChunk<S>>, version: u64) -> Result<Self, KbError> {
        let mut seen = HashSet::new();
        for chunk in &entries {
            check_entry(dimension, chunk)?;
            if !seen.insert(chunk.chunk_id.as_str()) {
                return Err(KbError::DuplicateChunk(chunk.chunk_id.clone()));
            }
        }
        Ok(Self {
            dimension,
            entries,
            version,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CourseChunk<S>] {
        &self.entries
    }

    pub fn get(&self, chunk_id: &str) -> Option<&CourseChunk<S>> {
        self.entries.iter().find(|c| c.chunk_id == chunk_id)
    }

    /// Inserts or replaces a chunk by id.
    pub fn upsert(&mut self, chunk: CourseChunk<S>) -> Result<(), KbError> {
        check_entry(self.dimension, &chunk)?;
        match self.entries.iter_mut().find(|c| c.chunk_id == chunk.chunk_id) {
            Some(slot) => *slot = chunk,
            None => self.entries.push(chunk),
        }
        self.version += 1;
        Ok(())
    }

    /// Drops every chunk of a document; returns how many were removed.
    pub fn remove_document(&mut self, doc_id: &str) -> usize {
        let before = self.entries.len();
        self.entries.retain(|c| c.doc_id != doc_id);
        let removed = before - self.entries.len();
        if removed > 0 {
            self.version += 1;
        }
        removed
    }
}

fn check_entry<S: Scalar>(dimension: usize, chunk: &CourseChunk<S>) -> Result<(), KbError> {
    match &chunk.embedding {
        Some(e) if e.dimension() == dimension => Ok(()),
        Some(e) => Err(KbError::DimensionMismatch {
            expected: dimension,
            actual: e.dimension(),
        }),
        None => Err(KbError::CorruptIndex(format!(
            "chunk `{}` has no embedding",
            chunk.chunk_id
        ))),
    }
}

/// Embeds any chunk lacking a vector and builds a fresh index (version 1).
pub async fn build_index<S: Scalar>(
    chunks: Vec<CourseChunk<S>>,
    provider: &dyn EmbeddingProvider<S>,
) -> Result<VectorIndex<S>, KbError> {
    let dimension = provider.dimension();
    let mut entries = Vec::with_capacity(chunks.len());
    for mut chunk in chunks {
        match &chunk.embedding {
            Some(e) if e.dimension() != dimension => {
                return Err(KbError::DimensionMismatch {
                    expected: dimension,
                    actual: e.dimension(),
                })
            }
            Some(_) => {}
            None => chunk.embedding = Some(embed_text(&chunk.text, provider).await?),
        }
        entries.push(chunk);
    }
    VectorIndex::from_parts(dimension, entries, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{chunk_id, Embedding, OfflineEmbedder};
    use crate::scalar::is_unit;

    fn raw(doc: &str, seq: usize, text: &str) -> CourseChunk<f64> {
        CourseChunk {
            chunk_id: chunk_id(doc, seq),
            doc_id: doc.into(),
            seq,
            text: text.into(),
            embedding: None,
        }
    }

    #[tokio::test]
    async fn empty_build() {
        let index = build_index::<f64>(vec![], &OfflineEmbedder::default()).await.unwrap();
        assert!(index.is_empty());
        assert_eq!(index.version(), 1);
        assert_eq!(index.dimension(), 256);
    }

    #[tokio::test]
    async fn three_chunks_are_embedded() {
        let chunks = vec![
            raw("a", 0, "for loops"),
            raw("a", 1, "while loops"),
            raw("b", 0, "dicts"),
        ];
        let index = build_index(chunks, &OfflineEmbedder::default()).await.unwrap();
        assert_eq!(index.len(), 3);
        for c in index.entries() {
            assert!(is_unit(c.embedding.as_ref().unwrap().as_slice()));
        }
    }

    #[tokio::test]
    async fn pre_embedded_dimension_mismatch() {
        let mut chunk = raw("a", 0, "x");
        chunk.embedding = Embedding::normalized(vec![1.0, 0.0]);
        let err = build_index(vec![chunk], &OfflineEmbedder::default()).await.unwrap_err();
        assert!(matches!(
            err,
            KbError::DimensionMismatch {
                expected: 256,
                actual: 2
            }
        ));
    }

    #[tokio::test]
    async fn mutations_bump_version() {
        let e = OfflineEmbedder::default();
        let mut index = build_index(vec![raw("a", 0, "x")], &e).await.unwrap();
        let mut c = raw("b", 0, "y");
        c.embedding = Some(e.embed_sync("y").unwrap());
        index.upsert(c.clone()).unwrap();
        assert_eq!(index.version(), 2);
        index.upsert(c).unwrap();
        assert_eq!((index.len(), index.version()), (2, 3));
        assert_eq!(index.remove_document("a"), 1);
        assert_eq!(index.version(), 4);
        assert_eq!(index.remove_document("zzz"), 0);
        assert_eq!(index.version(), 4);
    }

    #[tokio::test]
    async fn duplicate_ids_rejected() {
        let e = OfflineEmbedder::default();
        let mut c = raw("a", 0, "x");
        c.embedding = Some(e.embed_sync("x").unwrap());
        let err = VectorIndex::from_parts(256, vec![c.clone(), c], 1).unwrap_err();
        assert!(matches!(err, KbError::DuplicateChunk(_)));
    }
}
