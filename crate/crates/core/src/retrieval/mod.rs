//! Top-k cosine retrieval and the course-scope gate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{CourseChunk, VectorIndex};
use crate::scalar::{dot, Scalar};

pub const DEFAULT_SCOPE_THRESHOLD: f64 = 0.25;

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Cosine similarity of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity<S: Scalar>(a: &[S], b: &[S]) -> Result<S, RetrievalError> {
    if a.len() != b.len() {
        return Err(RetrievalError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(dot(a, b).max(-S::one()).min(S::one()))
}

#[derive(Debug, Clone, Copy)]
pub struct ScoredChunk<'a, S> {
    pub chunk: &'a CourseChunk<S>,
    pub score: S,
}

impl<S: Scalar> ScoredChunk<'_, S> {
    /// Descending score, then ascending chunk id.
    fn rank(&self, other: &Self) -> Ordering {
        other
            .score
            .partial_cmp(&self.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.chunk.chunk_id.cmp(&other.chunk.chunk_id))
    }
}

// Heap order: the worst-ranked candidate is the maximum.
struct Candidate<'a, S: Scalar>(ScoredChunk<'a, S>);

impl<S: Scalar> PartialEq for Candidate<'_, S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Candidate<'_, S> {}
impl<S: Scalar> PartialOrd for Candidate<'_, S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Candidate<'_, S> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank(&other.0)
    }
}

/// Exact top-k by cosine similarity, best first, ties by ascending chunk id.
///
/// A query whose dimension differs from the index matches nothing.
pub fn retrieve<'a, S: Scalar>(index: &'a VectorIndex<S>, query: &[S], k: usize) -> Vec<ScoredChunk<'a, S>> {
    if k == 0 || query.len() != index.dimension() {
        return Vec::new();
    }
    let mut heap: BinaryHeap<Candidate<'a, S>> = BinaryHeap::with_capacity(k + 1);
    for chunk in index.entries() {
        let Some(embedding) = &chunk.embedding else {
            continue;
        };
        let Ok(score) = cosine_similarity(embedding.as_slice(), query) else {
            continue;
        };
        let candidate = Candidate(ScoredChunk { chunk, score });
        if heap.len() < k {
            heap.push(candidate);
        } else if heap.peek().is_some_and(|worst| candidate < *worst) {
            heap.pop();
            heap.push(candidate);
        }
    }
    heap.into_sorted_vec().into_iter().map(|c| c.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeVerdict {
    InScope,
    OutOfScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScopeDecision {
    pub verdict: ScopeVerdict,
    pub top_score: f64,
    pub threshold: f64,
}

/// In scope iff at least one chunk was retrieved and the best score reaches
/// `threshold`. Only scores are consulted.
pub fn scope_check<S: Scalar>(results: &[ScoredChunk<'_, S>], threshold: f64) -> ScopeDecision {
    let top_score = results.first().map_or(0.0, |r| r.score.to_f64_lossy());
    let verdict = if !results.is_empty() && top_score >= threshold {
        ScopeVerdict::InScope
    } else {
        ScopeVerdict::OutOfScope
    };
    ScopeDecision {
        verdict,
        top_score,
        threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{chunk_id, Embedding};
    use proptest::prelude::*;

    fn index_of(vectors: &[Vec<f64>]) -> VectorIndex<f64> {
        let dim = vectors.first().map_or(2, Vec::len);
        let entries = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| CourseChunk {
                chunk_id: chunk_id("d", i),
                doc_id: "d".into(),
                seq: i,
                text: format!("chunk {i}"),
                embedding: Embedding::normalized(v.clone()),
            })
            .collect();
        VectorIndex::from_parts(dim, entries, 1).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let v = [0.6f64, 0.8];
        assert!((cosine_similarity(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = cosine_similarity(&[1.0, 0.0], &[h, h]).unwrap();
        assert_eq!(s, h);
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(RetrievalError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empty_index_returns_nothing() {
        let index = VectorIndex::<f64>::empty(2);
        assert!(retrieve(&index, &[1.0, 0.0], 3).is_empty());
    }

    #[test]
    fn large_k_returns_all_sorted() {
        let index = index_of(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        let got = retrieve(&index, &[1.0, 0.0], 10);
        let ids: Vec<_> = got.iter().map(|s| s.chunk.chunk_id.as_str()).collect();
        assert_eq!(ids, ["d#0001", "d#0002", "d#0000"]);
    }

    #[test]
    fn ties_break_by_chunk_id() {
        let index = index_of(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]);
        let got = retrieve(&index, &[1.0, 0.0], 2);
        let ids: Vec<_> = got.iter().map(|s| s.chunk.chunk_id.as_str()).collect();
        assert_eq!(ids, ["d#0000", "d#0001"]);
    }

    #[test]
    fn scope_rules() {
        let index = index_of(&[vec![1.0, 0.0]]);
        let mut results = retrieve(&index, &[1.0, 0.0], 1);
        results[0].score = 0.9;
        assert_eq!(scope_check(&results, 0.25).verdict, ScopeVerdict::InScope);
        let empty: Vec<ScoredChunk<'_, f64>> = Vec::new();
        let d = scope_check(&empty, 0.25);
        assert_eq!((d.verdict, d.top_score), (ScopeVerdict::OutOfScope, 0.0));
        // Exactly at the threshold is in scope.
        results[0].score = 0.25;
        assert_eq!(scope_check(&results, 0.25).verdict, ScopeVerdict::InScope);
    }

    proptest! {
        #[test]
        fn top_k_is_prefix_of_top_k_plus_one(
            vectors in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..30),
            query in prop::collection::vec(-1.0f64..1.0, 3),
            k in 1usize..10,
        ) {
            let vectors: Vec<_> = vectors.into_iter().filter(|v| v.iter().any(|x| *x != 0.0)).collect();
            prop_assume!(!vectors.is_empty() && query.iter().any(|x| *x != 0.0));
            let index = index_of(&vectors);
            let q = Embedding::normalized(query).unwrap();
            let a: Vec<_> = retrieve(&index, q.as_slice(), k).iter().map(|s| s.chunk.chunk_id.clone()).collect();
            let b: Vec<_> = retrieve(&index, q.as_slice(), k + 1).iter().map(|s| s.chunk.chunk_id.clone()).collect();
            prop_assert_eq!(a.len(), k.min(index.len()));
            prop_assert_eq!(&b[..a.len()], &a[..]);
        }

        #[test]
        fn raising_threshold_never_admits(score in -1.0f64..1.0, t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let index = index_of(&[vec![1.0, 0.0]]);
            let mut results = retrieve(&index, &[1.0, 0.0], 1);
            results[0].score = score;
            if scope_check(&results, lo).verdict == ScopeVerdict::OutOfScope {
                prop_assert_eq!(scope_check(&results, hi).verdict, ScopeVerdict::OutOfScope);
            }
        }
    }
}
