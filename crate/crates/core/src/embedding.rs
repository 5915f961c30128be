//! Embedding providers and cosine-distance math for memory recall.
//!
//! Two providers share one contract: a deterministic local feature-hashing
//! embedder for tests and offline runs, and a JSON-over-HTTP client for an
//! external embedding service. Every produced vector has unit L2 norm.
//!
//! Remote wire contract (JSON bodies over HTTP POST):
//!   request:  `{"model": "<model name>", "input": "<text>"}`
//!   response: `{"embedding": [<float>, ...]}`
//! The response vector is re-normalized on receipt and its dimension is
//! checked against the configured one.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Dimension of the local feature-hashing embedder.
pub const LOCAL_DIM: usize = 256;

/// Fixed hash seed of the local embedder; changing it changes every vector.
pub const LOCAL_HASH_SEED: u64 = 0x00d1_5ea5_e0ff_1ce5;

/// Unit-norm tolerance.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("remote embedding has dimension {got}, expected {expected}")]
    DimensionDrift { expected: usize, got: usize },
    #[error("embedding vector has zero or non-finite norm")]
    DegenerateNorm,
    #[error("embedding request timed out")]
    Timeout,
    #[error("embedding request failed: {0}")]
    Network(String),
    #[error("embedding endpoint returned status {0}")]
    Status(u16),
    #[error("malformed embedding response: {0}")]
    MalformedBody(String),
}

/// A unit-L2-norm vector of fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector<F>(Vec<F>);

impl<F: Real> EmbeddingVector<F> {
    /// Normalize raw values into a unit vector.
    pub fn from_unnormalized(values: Vec<F>) -> Result<Self, EmbeddingError> {
        let norm = values.iter().map(|v| *v * *v).sum::<F>().sqrt();
        if !norm.is_finite() || norm == F::zero() {
            return Err(EmbeddingError::DegenerateNorm);
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn values(&self) -> &[F] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> F {
        self.0.iter().map(|v| *v * *v).sum::<F>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<F, EmbeddingError> {
        if self.dim() != other.dim() {
            return Err(EmbeddingError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| *a * *b)
            .sum())
    }
}

/// Cosine distance `1 - dot(a, b)`, in [0, 2] for unit vectors.
pub fn cosine_distance<F: Real>(
    a: &EmbeddingVector<F>,
    b: &EmbeddingVector<F>,
) -> Result<F, EmbeddingError> {
    Ok(F::one() - a.dot(b)?)
}

/// Lowercase alphanumeric tokens of `text`.
fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect::<Vec<_>>()
        .into_iter()
}

/// Deterministic signed feature hashing into [`LOCAL_DIM`] buckets.
///
/// Each token hashes to one bucket with sign +/-1; accumulated weights are
/// L2-normalized. An empty token set maps to the fixed basis vector e0.
pub fn embed_local<F: Real>(text: &str) -> EmbeddingVector<F> {
    let mut acc = vec![F::zero(); LOCAL_DIM];
    let mut any = false;
    for token in tokenize(text) {
        let h = crate::sketch::seeded_hash(LOCAL_HASH_SEED, token.as_bytes());
        let bucket = (h % LOCAL_DIM as u64) as usize;
        let sign = if (h >> 63) & 1 == 0 { F::one() } else { -F::one() };
        acc[bucket] = acc[bucket] + sign;
        any = true;
    }
    if !any {
        acc[0] = F::one();
    }
    // Cancellation can zero the accumulator even with tokens present; fall
    // back to the basis vector so the unit-norm invariant always holds.
    EmbeddingVector::from_unnormalized(acc).unwrap_or_else(|_| {
        let mut basis = vec![F::zero(); LOCAL_DIM];
        basis[0] = F::one();
        EmbeddingVector(basis)
    })
}

/// Something that turns text into a unit-norm vector.
pub trait TextEmbedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<crate::Embedding, EmbeddingError>;
    fn dim(&self) -> usize;
}

/// The in-process feature-hashing embedder.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalEmbedder;

impl TextEmbedder for LocalEmbedder {
    fn embed(&self, text: &str) -> Result<crate::Embedding, EmbeddingError> {
        Ok(embed_local(text))
    }

    fn dim(&self) -> usize {
        LOCAL_DIM
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

/// Client for an external embedding service. Never used by tests or the
/// simulator unless explicitly configured.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    dim: usize,
    retry_once: bool,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        dim: usize,
        timeout: Duration,
    ) -> Result<Self, EmbeddingError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbeddingError::Network(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            dim,
            retry_once: false,
            client,
        })
    }

    /// Retry a failed request once. Off by default.
    pub fn with_retry_once(mut self, retry: bool) -> Self {
        self.retry_once = retry;
        self
    }

    fn request(&self, text: &str) -> Result<crate::Embedding, EmbeddingError> {
        let response = self
            .client
            .post(&self.endpoint)
            .json(&EmbedRequest {
                model: &self.model,
                input: text,
            })
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    EmbeddingError::Timeout
                } else {
                    EmbeddingError::Network(e.to_string())
                }
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(EmbeddingError::Status(status.as_u16()));
        }
        let body: EmbedResponse = response
            .json()
            .map_err(|e| EmbeddingError::MalformedBody(e.to_string()))?;
        if body.embedding.len() != self.dim {
            return Err(EmbeddingError::DimensionDrift {
                expected: self.dim,
                got: body.embedding.len(),
            });
        }
        let values = body.embedding.iter().map(|v| *v as f32).collect();
        EmbeddingVector::from_unnormalized(values)
    }
}

impl TextEmbedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<crate::Embedding, EmbeddingError> {
        match self.request(text) {
            // Transient failures only: timeouts, transport errors, and
            // server-side (5xx) statuses.
            Err(
                EmbeddingError::Timeout
                | EmbeddingError::Network(_)
                | EmbeddingError::Status(500..=599),
            ) if self.retry_once => self.request(text),
            other => other,
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
