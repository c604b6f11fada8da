//! Token-level embedding similarity: cosine-based precision/recall/F1 over
//! two token streams, in the style of embedding-based code-similarity
//! scoring. The embedder is pluggable: a deterministic hash-derived table for
//! tests and offline runs, or an HTTP embedding service for production.

use serde::Deserialize;

use crate::dedup::{fnv1a64, splitmix64};
use crate::error::{Error, Result};

/// Produces one vector per token. Implementations must be deterministic for
/// a fixed configuration so that reruns score identically.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>>;
}

/// Deterministic embedder: each token's vector is derived from a hash of its
/// text, unit-normalized. Equal tokens embed equally; unequal tokens are
/// near-orthogonal in expectation at reasonable dimensionality.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dims: usize,
    pub seed: u64,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dims: 64, seed: 0 }
    }
}

impl Embedder for HashEmbedder {
    fn name(&self) -> &str {
        "hash"
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(tokens
            .iter()
            .map(|t| {
                let mut state = fnv1a64(t.as_bytes()) ^ self.seed;
                let mut v: Vec<f64> = (0..self.dims)
                    .map(|_| {
                        let x = splitmix64(&mut state);
                        // Map the top 53 bits to [-1, 1).
                        (x >> 11) as f64 / (1u64 << 52) as f64 - 1.0
                    })
                    .collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for x in &mut v {
                        *x /= norm;
                    }
                } else if let Some(first) = v.first_mut() {
                    *first = 1.0;
                }
                v
            })
            .collect())
    }
}

/// Client for an HTTP embedding service with the common `/embeddings`
/// request/response shape: `{"model": …, "input": [token, …]}` in,
/// `{"data": [{"embedding": [f64, …]}, …]}` out.
pub struct HttpEmbedder {
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct EmbeddingData {
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingData>,
}

impl HttpEmbedder {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key_env: impl Into<String>) -> Self {
        HttpEmbedder {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: api_key_env.into(),
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn name(&self) -> &str {
        "http"
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>> {
        let url = format!("{}/embeddings", self.base_url.trim_end_matches('/'));
        let mut req = self
            .client
            .post(&url)
            .json(&serde_json::json!({ "model": self.model, "input": tokens }));
        if let Ok(key) = std::env::var(&self.api_key_env) {
            req = req.bearer_auth(key);
        }
        let resp = req.send()?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Error::ProviderTransient {
                provider: self.name().to_string(),
                detail: format!("embedding service returned {status}"),
            });
        }
        if !status.is_success() {
            return Err(Error::Provider {
                provider: self.name().to_string(),
                detail: format!("embedding service returned {status}"),
            });
        }
        let body: EmbeddingResponse = resp.json()?;
        if body.data.len() != tokens.len() {
            return Err(Error::Provider {
                provider: self.name().to_string(),
                detail: format!("expected {} embeddings, got {}", tokens.len(), body.data.len()),
            });
        }
        Ok(body.data.into_iter().map(|d| d.embedding).collect())
    }
}

/// Cosine similarity clamped to [0, 1]; zero-norm vectors score 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Greedy-matching F1 over token vectors: precision is the mean, over
/// candidate tokens, of the best cosine against any reference token; recall
/// is the mirror image; F1 is their harmonic mean.
pub fn embedding_f1(candidate: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::Score { detail: "empty token list".into() });
    }
    let dim = candidate[0].len();
    for v in candidate.iter().chain(reference.iter()) {
        if v.len() != dim {
            return Err(Error::Score {
                detail: format!("embedding dimension mismatch: {} vs {}", dim, v.len()),
            });
        }
    }
    let best = |from: &[Vec<f64>], against: &[Vec<f64>]| -> f64 {
        let total: f64 = from
            .iter()
            .map(|v| against.iter().map(|w| cosine(v, w)).fold(0.0f64, f64::max))
            .sum();
        total / from.len() as f64
    };
    let precision = best(candidate, reference);
    let recall = best(reference, candidate);
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Embeds both token streams with the same embedder and scores them.
pub fn token_similarity(embedder: &dyn Embedder, candidate: &[String], reference: &[String]) -> Result<f64> {
    let cv = embedder.embed(candidate)?;
    let rv = embedder.embed(reference)?;
    embedding_f1(&cv, &rv)
}
