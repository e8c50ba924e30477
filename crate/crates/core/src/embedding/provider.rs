use serde_json::{json, Value};

use super::EmbeddingError;
use crate::http::{JsonClient, RetryPolicy};

/// Something that turns texts into vectors, one per input, in order.
pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError>;
}

/// Embeddings endpoint speaking `{"model", "input": [..]}`.
///
/// Accepts `{"data": [{"embedding": [..], "index": i}]}`, `{"embeddings": [[..]]}`
/// or a bare array of arrays in response.
#[derive(Debug, Clone)]
pub struct HttpEmbeddingProvider {
    client: JsonClient,
    model_id: String,
}

impl HttpEmbeddingProvider {
    pub fn new(
        endpoint: impl Into<String>,
        model_id: impl Into<String>,
        api_key: Option<String>,
        retry: RetryPolicy,
    ) -> Self {
        HttpEmbeddingProvider {
            client: JsonClient::new(endpoint, api_key, retry),
            model_id: model_id.into(),
        }
    }
}

pub fn parse_embedding_response(value: &Value) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    let bad = |m: &str| EmbeddingError::Response(m.to_string());
    let to_vec = |v: &Value| -> Result<Vec<f64>, EmbeddingError> {
        v.as_array()
            .ok_or_else(|| bad("embedding is not an array"))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| bad("non-numeric component")))
            .collect()
    };
    if let Some(data) = value.get("data").and_then(Value::as_array) {
        let mut indexed = Vec::with_capacity(data.len());
        for (pos, item) in data.iter().enumerate() {
            let idx = item.get("index").and_then(Value::as_u64).map(|i| i as usize).unwrap_or(pos);
            let emb = item.get("embedding").ok_or_else(|| bad("missing embedding field"))?;
            indexed.push((idx, to_vec(emb)?));
        }
        indexed.sort_by_key(|(i, _)| *i);
        return Ok(indexed.into_iter().map(|(_, v)| v).collect());
    }
    let list = value
        .get("embeddings")
        .unwrap_or(value)
        .as_array()
        .ok_or_else(|| bad("unrecognised response shape"))?;
    list.iter().map(to_vec).collect()
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let body = json!({ "model": self.model_id, "input": texts });
        let response = self.client.post(&body)?;
        parse_embedding_response(&response)
    }
}

/// Deterministic bag-of-words feature hashing, L2-normalised. Needs no
/// network and is useful for smoke tests and synthetic studies.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    model_id: String,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        HashingEmbedder {
            dim: dim.max(1),
            model_id: format!("hashing-{}", dim.max(1)),
        }
    }

    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for token in crate::iterate::tokenize(text) {
            let h = fnv1a(token.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl EmbeddingProvider for HashingEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }
}

/// Stands in for a remote provider when running offline; any cache miss is an error.
#[derive(Debug, Clone)]
pub struct OfflineEmbedder {
    model_id: String,
}

impl OfflineEmbedder {
    pub fn new(model_id: impl Into<String>) -> Self {
        OfflineEmbedder { model_id: model_id.into() }
    }
}

impl EmbeddingProvider for OfflineEmbedder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Err(EmbeddingError::Offline(
            texts.first().map(|t| t.lines().next().unwrap_or("").to_string()).unwrap_or_default(),
        ))
    }
}
