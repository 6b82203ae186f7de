use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    chunk_document, embed_text, ChunkingParams, EmbeddingBackend, GuidelineDocument,
    RetrievalError, SourceTag, VectorIndex,
};

fn tag_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(?:<!--|#|//)?\s*source\s*:\s*([A-Za-z]+)\s*(?:-->)?\s*$")
            .expect("static regex")
    })
}

/// Reads every `.md` / `.txt` file in `dir` (sorted by name). The file stem is
/// the doc id; a first line like `<!-- source: DASH -->` sets the source tag
/// and is not part of the body.
pub fn load_corpus(dir: &Path) -> Result<Vec<GuidelineDocument>, RetrievalError> {
    let io = |e: std::io::Error| RetrievalError::Config(format!("corpus {}: {e}", dir.display()));
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "md" || x == "txt"))
        .collect();
    paths.sort();
    let mut docs = Vec::with_capacity(paths.len());
    for p in paths {
        let raw = std::fs::read_to_string(&p).map_err(io)?;
        let doc_id = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let (tag, body) = match raw.split_once('\n') {
            Some((first, rest)) => match tag_line().captures(first) {
                Some(c) => (SourceTag::parse(&c[1]), rest.to_string()),
                None => (SourceTag::Other, raw.clone()),
            },
            None => (SourceTag::Other, raw.clone()),
        };
        docs.push(GuidelineDocument::new(doc_id, tag, body)?);
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub chunk_id: String,
    pub doc_id: String,
    pub source_tag: SourceTag,
    pub score: f64,
    pub text: String,
}

/// Chunked, embedded guideline corpus plus the backend used to embed queries.
#[derive(Clone)]
pub struct GuidelineStore {
    index: VectorIndex,
    tags: BTreeMap<String, SourceTag>,
    backend: Arc<dyn EmbeddingBackend>,
}

impl GuidelineStore {
    pub fn build(
        docs: &[GuidelineDocument],
        params: ChunkingParams,
        backend: Arc<dyn EmbeddingBackend>,
    ) -> Result<Self, RetrievalError> {
        let mut chunks = Vec::new();
        let mut tags = BTreeMap::new();
        for d in docs {
            chunks.extend(chunk_document(d, params.chunk_chars, params.overlap_chars)?);
            tags.insert(d.doc_id().to_string(), d.source_tag());
        }
        let index = VectorIndex::build(chunks, backend.as_ref())?;
        Ok(GuidelineStore { index, tags, backend })
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn source_of(&self, doc_id: &str) -> SourceTag {
        self.tags.get(doc_id).copied().unwrap_or(SourceTag::Other)
    }

    pub fn contains_chunk(&self, chunk_id: &str) -> bool {
        self.index.entries().iter().any(|(c, _)| c.chunk_id == chunk_id)
    }

    /// Embeds `query` and returns the top `k` chunks, optionally restricted
    /// to the given source tags (empty filter = whole corpus).
    pub fn retrieve(
        &self,
        query: &str,
        k: usize,
        sources: &[SourceTag],
    ) -> Result<Vec<RetrievalHit>, RetrievalError> {
        let q = embed_text(self.backend.as_ref(), query)?;
        let hits = self
            .index
            .top_k_where(&q, k, |c| sources.is_empty() || sources.contains(&self.source_of(&c.doc_id)))?;
        Ok(hits
            .into_iter()
            .map(|(c, score)| RetrievalHit {
                source_tag: self.source_of(&c.doc_id),
                chunk_id: c.chunk_id,
                doc_id: c.doc_id,
                score,
                text: c.text,
            })
            .collect())
    }
}
