use serde::{Deserialize, Serialize};

use super::RetrievalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceTag {
    #[serde(rename = "DASH")]
    Dash,
    #[serde(rename = "ADA")]
    Ada,
    #[serde(rename = "USDA")]
    Usda,
    #[serde(rename = "other")]
    Other,
}

impl SourceTag {
    pub fn parse(s: &str) -> SourceTag {
        match s.trim().to_uppercase().as_str() {
            "DASH" => SourceTag::Dash,
            "ADA" => SourceTag::Ada,
            "USDA" => SourceTag::Usda,
            _ => SourceTag::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::Dash => "DASH",
            SourceTag::Ada => "ADA",
            SourceTag::Usda => "USDA",
            SourceTag::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidelineDocument {
    doc_id: String,
    source_tag: SourceTag,
    body: String,
}

impl GuidelineDocument {
    /// Rejects empty (or whitespace-only) bodies, so the chunker never sees one.
    pub fn new(
        doc_id: impl Into<String>,
        source_tag: SourceTag,
        body: impl Into<String>,
    ) -> Result<Self, RetrievalError> {
        let doc_id = doc_id.into();
        let body = body.into();
        if body.trim().is_empty() {
            return Err(RetrievalError::Document {
                doc_id,
                message: "body is empty".into(),
            });
        }
        Ok(GuidelineDocument {
            doc_id,
            source_tag,
            body,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn source_tag(&self) -> SourceTag {
        self.source_tag
    }

    pub fn body(&self) -> &str {
        &self.body
    }
}

/// A window of a guideline body. `offset` counts characters, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub offset: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingParams {
    pub chunk_chars: usize,
    pub overlap_chars: usize,
}

impl Default for ChunkingParams {
    fn default() -> Self {
        ChunkingParams {
            chunk_chars: 800,
            overlap_chars: 160,
        }
    }
}

impl ChunkingParams {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.chunk_chars == 0 {
            return Err(RetrievalError::Config("chunk_chars must be positive".into()));
        }
        if self.overlap_chars >= self.chunk_chars {
            return Err(RetrievalError::Config(format!(
                "overlap_chars ({}) must be smaller than chunk_chars ({})",
                self.overlap_chars, self.chunk_chars
            )));
        }
        Ok(())
    }
}

/// Fixed-size character windows advancing by `chunk_chars - overlap_chars`.
///
/// Every chunk but the last is exactly `chunk_chars` long, so consecutive
/// chunks share exactly `overlap_chars` characters and dropping that prefix
/// from every chunk after the first and concatenating reproduces the body.
pub fn chunk_document(
    doc: &GuidelineDocument,
    chunk_chars: usize,
    overlap_chars: usize,
) -> Result<Vec<Chunk>, RetrievalError> {
    ChunkingParams {
        chunk_chars,
        overlap_chars,
    }
    .validate()?;
    let chars: Vec<char> = doc.body.chars().collect();
    let stride = chunk_chars - overlap_chars;
    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + chunk_chars).min(chars.len());
        chunks.push(Chunk {
            chunk_id: format!("{}#{:04}", doc.doc_id, chunks.len()),
            doc_id: doc.doc_id.clone(),
            offset: start,
            text: chars[start..end].iter().collect(),
        });
        if end == chars.len() {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}
