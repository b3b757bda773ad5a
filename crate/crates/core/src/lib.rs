//! Course-aware tutoring service: a local knowledge base of course material,
//! a similarity scope gate, hint-oriented prompt policy, pluggable completion
//! providers, an HTTP API and JSONL telemetry with offline analytics.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix it to `f64`,
//! which is what the service uses.

pub mod analytics;
pub mod kb;
pub mod policy;
pub mod provider;
pub mod retrieval;
pub mod scalar;
pub mod service;
pub mod telemetry;

pub use scalar::Scalar;

pub type Embedding = kb::Embedding<f64>;
pub type CourseChunk = kb::CourseChunk<f64>;
pub type VectorIndex = kb::VectorIndex<f64>;
pub type ScoredChunk<'a> = retrieval::ScoredChunk<'a, f64>;
