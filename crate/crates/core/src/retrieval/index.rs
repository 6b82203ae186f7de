use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::{cosine_similarity, Chunk, EmbeddingBackend, EmbeddingVector, RetrievalError};

/// Exact, exhaustive-scan cosine index. Immutable once built.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    dimension: usize,
    entries: Vec<(Chunk, EmbeddingVector)>,
}

impl VectorIndex {
    pub fn new(dimension: usize) -> Self {
        VectorIndex {
            dimension,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(
        dimension: usize,
        entries: Vec<(Chunk, EmbeddingVector)>,
    ) -> Result<Self, RetrievalError> {
        let mut seen = BTreeSet::new();
        for (chunk, v) in &entries {
            if v.dimension() != dimension {
                return Err(RetrievalError::Dimension {
                    expected: dimension,
                    actual: v.dimension(),
                });
            }
            if !seen.insert(chunk.chunk_id.as_str()) {
                return Err(RetrievalError::DuplicateChunk(chunk.chunk_id.clone()));
            }
        }
        Ok(VectorIndex { dimension, entries })
    }

    /// Embeds every chunk with `backend`.
    pub fn build(chunks: Vec<Chunk>, backend: &dyn EmbeddingBackend) -> Result<Self, RetrievalError> {
        let entries = chunks
            .into_iter()
            .map(|c| {
                let v = super::embed_text(backend, &c.text)?;
                Ok((c, v))
            })
            .collect::<Result<Vec<_>, RetrievalError>>()?;
        Self::from_entries(backend.dimension(), entries)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Chunk, EmbeddingVector)] {
        &self.entries
    }

    /// Top-k restricted to chunks accepted by `keep`.
    pub fn top_k_where(
        &self,
        query: &EmbeddingVector,
        k: usize,
        keep: impl Fn(&Chunk) -> bool,
    ) -> Result<Vec<(Chunk, f64)>, RetrievalError> {
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        if k == 0 {
            return Err(RetrievalError::Config("k must be positive".into()));
        }
        if query.dimension() != self.dimension {
            return Err(RetrievalError::Dimension {
                expected: self.dimension,
                actual: query.dimension(),
            });
        }
        let mut scored = Vec::with_capacity(self.entries.len());
        for (chunk, v) in &self.entries {
            if keep(chunk) {
                scored.push((chunk, cosine_similarity(query, v)?));
            }
        }
        let by_rank = |a: &(&Chunk, f64), b: &(&Chunk, f64)| -> Ordering {
            b.1.total_cmp(&a.1).then_with(|| a.0.chunk_id.cmp(&b.0.chunk_id))
        };
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        Ok(scored.into_iter().map(|(c, s)| (c.clone(), s)).collect())
    }
}

/// The `k` highest-cosine chunks (all of them when `k` exceeds the index
/// size), by non-increasing score with ties broken by ascending chunk id.
pub fn retrieve_top_k(
    index: &VectorIndex,
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<(Chunk, f64)>, RetrievalError> {
    index.top_k_where(query, k, |_| true)
}
