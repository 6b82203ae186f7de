use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::RetrievalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub trait EmbeddingBackend: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, RetrievalError>;
}

/// Embeds `text` and checks the backend honored its declared dimension.
pub fn embed_text(
    backend: &dyn EmbeddingBackend,
    text: &str,
) -> Result<EmbeddingVector, RetrievalError> {
    if text.trim().is_empty() {
        return Err(RetrievalError::Backend("cannot embed empty text".into()));
    }
    let values = backend.embed_raw(text)?;
    if values.len() != backend.dimension() {
        return Err(RetrievalError::Dimension {
            expected: backend.dimension(),
            actual: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(RetrievalError::Backend("non-finite embedding component".into()));
    }
    let v = EmbeddingVector(values);
    if v.norm() == 0.0 {
        return Err(RetrievalError::ZeroNorm);
    }
    Ok(v)
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, RetrievalError> {
    if a.dimension() != b.dimension() {
        return Err(RetrievalError::Dimension {
            expected: a.dimension(),
            actual: b.dimension(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(RetrievalError::ZeroNorm);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Offline embedder: signed feature hashing of lowercase alphanumeric tokens
/// into `dimension` buckets, L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBagOfTokens {
    pub dimension: usize,
    pub seed: u64,
}

impl HashedBagOfTokens {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashedBagOfTokens { dimension, seed }
    }

    fn hash(&self, token: &str) -> u64 {
        // FNV-1a, seed folded into the offset basis
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        for b in token.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

impl EmbeddingBackend for HashedBagOfTokens {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        let lower = text.to_lowercase();
        let mut tokens: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();
        let trimmed = lower.trim();
        if tokens.is_empty() {
            tokens.push(trimmed);
        }
        let mut v = vec![0.0; self.dimension];
        for t in tokens {
            let h = self.hash(t);
            let bucket = (h % self.dimension as u64) as usize;
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// OpenAI-compatible `POST {base_url}/embeddings` client.
///
/// Request: `{"model": ..., "input": [text]}`. Response:
/// `{"data": [{"embedding": [f64, ...]}]}`.
pub struct RemoteEmbeddingBackend {
    agent: ureq::Agent,
    base_url: String,
    model: String,
    api_key: Option<String>,
    dimension: usize,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: [&'a str; 1],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl RemoteEmbeddingBackend {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, dimension: usize) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        RemoteEmbeddingBackend {
            agent,
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            dimension,
        }
    }
}

impl EmbeddingBackend for RemoteEmbeddingBackend {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, RetrievalError> {
        let mut req = self.agent.post(format!("{}/embeddings", self.base_url));
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let body = EmbeddingRequest {
            model: &self.model,
            input: [text],
        };
        let mut resp = req
            .send_json(&body)
            .map_err(|e| RetrievalError::Backend(e.to_string()))?;
        let parsed: EmbeddingResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| RetrievalError::Backend(e.to_string()))?;
        parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| RetrievalError::Backend("empty embedding response".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct WrongDim;
    impl EmbeddingBackend for WrongDim {
        fn dimension(&self) -> usize {
            4
        }
        fn embed_raw(&self, _: &str) -> Result<Vec<f64>, RetrievalError> {
            Ok(vec![1.0; 3])
        }
    }

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector(xs.to_vec())
    }

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        // 32 / (sqrt(14) * sqrt(77)) = 0.9746318461970762
        let c = cosine_similarity(&v(&[1.0, 2.0, 3.0]), &v(&[4.0, 5.0, 6.0])).unwrap();
        assert!((c - 0.974_632).abs() < 1e-6);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(
            cosine_similarity(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(RetrievalError::Dimension { .. })
        ));
        assert!(matches!(
            cosine_similarity(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(RetrievalError::ZeroNorm)
        ));
    }

    #[test]
    fn hashed_embedder_is_deterministic_and_unit_norm() {
        let be = HashedBagOfTokens::new(64, 7);
        let a = embed_text(&be, "sodium").unwrap();
        let b = embed_text(&HashedBagOfTokens::new(64, 7), "sodium").unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
        // a single token lands in exactly one bucket
        assert_eq!(a.0.iter().filter(|x| **x != 0.0).count(), 1);
    }

    #[test]
    fn hashed_embedder_punctuation_only_text() {
        let be = HashedBagOfTokens::new(16, 1);
        assert!(embed_text(&be, "!!!").is_ok());
        assert!(embed_text(&be, "  ").is_err());
    }

    #[test]
    fn wrong_dimension_detected() {
        assert!(matches!(
            embed_text(&WrongDim, "x"),
            Err(RetrievalError::Dimension { expected: 4, actual: 3 })
        ));
    }
}
