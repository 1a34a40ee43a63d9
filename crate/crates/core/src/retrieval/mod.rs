//! The example store: skeleton embeddings of past buggy code mapped to their
//! (buggy, fixed) pairs, with exact nearest-neighbour lookup by cosine
//! similarity.
//!
//! Vector math is generic over [`Scalar`]; the crate root exposes `f64`
//! aliases used by the rest of the pipeline.

mod embed;
mod scalar;
mod store;
mod vector;

pub use embed::{Embedder, HashedTrigramEmbedder, RemoteEmbedder, DEFAULT_DIM};
pub use scalar::Scalar;
pub use store::{changed_lines, fixed_variables, Entry, Store, SCHEMA_VERSION};
pub use vector::{cosine_similarity, Embedding};

use crate::skeleton::SkeletonError;

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("store was built with embedder {store:?}, not {embedder:?}")]
    EmbedderMismatch { store: String, embedder: String },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("embedding contains a non-finite value")]
    NonFinite,
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider failed: {0}")]
    ProviderFailure(String),
    #[error("buggy code does not skeletonize: {0}")]
    Parse(#[from] SkeletonError),
    #[error("buggy and fixed code are identical")]
    IdenticalPair,
    #[error("duplicate entry id {0:?}")]
    DuplicateId(String),
    #[error("unsupported store schema_version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u64 },
    #[error("cannot access store {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid store document: {0}")]
    Json(#[from] serde_json::Error),
}
