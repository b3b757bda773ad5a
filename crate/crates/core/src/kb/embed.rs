use std::collections::BTreeMap;

use async_trait::async_trait;

use super::{Embedding, KbError};
use crate::scalar::Scalar;

pub const OFFLINE_DIMENSION: usize = 256;

/// Maps text to a unit-length vector of fixed dimension.
#[async_trait]
pub trait EmbeddingProvider<S: Scalar>: Send + Sync {
    fn id(&self) -> &str;

    fn dimension(&self) -> usize;

    async fn embed(&self, text: &str) -> Result<Embedding<S>, KbError>;
}

/// Embeds `text`, checking the provider honoured its dimension.
pub async fn embed_text<S: Scalar>(text: &str, provider: &dyn EmbeddingProvider<S>) -> Result<Embedding<S>, KbError> {
    if text.is_empty() {
        return Err(KbError::EmptyText);
    }
    let embedding = provider.embed(text).await?;
    if embedding.dimension() != provider.dimension() {
        return Err(KbError::DimensionMismatch {
            expected: provider.dimension(),
            actual: embedding.dimension(),
        });
    }
    Ok(embedding)
}

/// English function words dropped before hashing. Python keywords that are
/// not ordinary English words (`while`, `def`, `return`, `none`, ...) are kept.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "also", "am", "an", "and", "any", "are", "as", "at", "be", "been", "being", "both", "but", "by",
    "can", "could", "did", "do", "does", "doing", "down", "each", "else", "few", "for", "from", "had", "has", "have",
    "he", "her", "here", "him", "his", "how", "i", "if", "in", "is", "it", "its", "just", "like", "may", "me", "might",
    "more", "most", "must", "my", "no", "nor", "not", "of", "off", "on", "only", "or", "our", "out", "over", "own",
    "please", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "them", "then", "there",
    "these", "they", "this", "those", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when",
    "where", "which", "who", "whom", "whose", "why", "will", "with", "would", "you", "your",
];

/// Hashed term-frequency embedder. Needs no network and is a pure function
/// of the text: tokens are lowercased runs of alphanumerics/underscore and
/// stopwords are dropped. A term occurring `n` times adds `1 + ln n` to
/// bucket `fnv1a(term) % dimension`; the vector is then L2-normalized.
#[derive(Debug, Clone)]
pub struct OfflineEmbedder {
    dimension: usize,
    filter_stopwords: bool,
}

impl Default for OfflineEmbedder {
    fn default() -> Self {
        Self {
            dimension: OFFLINE_DIMENSION,
            filter_stopwords: true,
        }
    }
}

impl OfflineEmbedder {
    pub fn with_dimension(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self {
            dimension,
            ..Self::default()
        }
    }

    /// Counts every token, stopwords included.
    pub fn keep_stopwords(mut self) -> Self {
        self.filter_stopwords = false;
        self
    }

    /// Tokens that contribute to the vector. Text made only of stopwords
    /// keeps all of its tokens.
    pub fn terms(&self, text: &str) -> Vec<String> {
        let tokens = word_tokens(text);
        if !self.filter_stopwords {
            return tokens;
        }
        let content: Vec<String> = tokens.iter().filter(|t| !is_stopword(t)).cloned().collect();
        if content.is_empty() {
            tokens
        } else {
            content
        }
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a_64(token.as_bytes()) % self.dimension as u64) as usize
    }

    pub fn embed_sync<S: Scalar>(&self, text: &str) -> Result<Embedding<S>, KbError> {
        if text.is_empty() {
            return Err(KbError::EmptyText);
        }
        let mut counts = vec![S::zero(); self.dimension];
        let tokens = self.terms(text);
        if tokens.is_empty() {
            // Punctuation-only text still gets a stable vector.
            counts[self.bucket(text.trim())] = S::one();
        }
        let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
        for token in &tokens {
            *tf.entry(token.as_str()).or_default() += 1;
        }
        for (term, n) in tf {
            let weight = S::one() + S::from_f64_lossy(f64::from(n).ln());
            let slot = &mut counts[self.bucket(term)];
            *slot = *slot + weight;
        }
        Embedding::normalized(counts).ok_or(KbError::EmptyText)
    }
}

#[async_trait]
impl<S: Scalar> EmbeddingProvider<S> for OfflineEmbedder {
    fn id(&self) -> &str {
        "offline-hashed-tf"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    async fn embed(&self, text: &str) -> Result<Embedding<S>, KbError> {
        self.embed_sync(text)
    }
}

pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// 64-bit FNV-1a.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}
