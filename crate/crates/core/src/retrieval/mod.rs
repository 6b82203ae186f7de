//! Dual-source grounding: top-k cosine retrieval over chunked guideline
//! documents, and structured drug-label lookup filtered to food-relevant
//! sections.

mod chunk;
mod corpus;
mod embed;
mod index;
mod labels;

pub use chunk::{chunk_document, Chunk, ChunkingParams, GuidelineDocument, SourceTag};
pub use corpus::{load_corpus, GuidelineStore, RetrievalHit};
pub use embed::{
    cosine_similarity, embed_text, EmbeddingBackend, EmbeddingVector, HashedBagOfTokens,
    RemoteEmbeddingBackend,
};
pub use index::{retrieve_top_k, VectorIndex};
pub use labels::{
    extract_food_sections, fetch_drug_labels, DrugLabel, FixtureLabelSource, LabelFetch,
    LabelRecord, LabelSource, OpenFdaLabelSource, DEFAULT_FOOD_SECTION_PATTERNS,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid document `{doc_id}`: {message}")]
    Document { doc_id: String, message: String },
    #[error("embedding backend error: {0}")]
    Backend(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("index is empty")]
    EmptyIndex,
    #[error("duplicate chunk id `{0}`")]
    DuplicateChunk(String),
    #[error("label source unavailable: {0}")]
    SourceUnavailable(String),
}
