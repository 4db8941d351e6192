//! HTTP client for an external embedding service.
//!
//! Wire protocol: `POST` to the configured URL with body
//! `{"texts": ["...", ...]}`; the service answers HTTP 200 with
//! `{"embeddings": [[f64, ...], ...]}`, one vector per text, in order.
//! Vectors are L2-normalized on receipt if not already.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::embed::{EmbedError, Embedder, EmbeddingVector};
use crate::scalar::Real;

/// Environment variable consulted for the endpoint URL.
pub const EMBED_URL_ENV: &str = "PRAXIS_EMBED_URL";

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

/// Client for the embedding service wire protocol above.
pub struct RemoteEmbedder {
    endpoint: String,
    dim: usize,
    agent: ureq::Agent,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, dim: usize) -> Self {
        Self::with_timeout(endpoint, dim, Duration::from_secs(10))
    }

    pub fn with_timeout(endpoint: impl Into<String>, dim: usize, timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        Self {
            endpoint: endpoint.into(),
            dim,
            agent: config.new_agent(),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl<F: Real> Embedder<F> for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<F>>, EmbedError> {
        if texts.is_empty() {
            return Err(EmbedError::EmptyBatch);
        }
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(EmbedRequest { texts })
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let parsed: EmbedResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::MalformedResponse(e.to_string()))?;
        if parsed.embeddings.len() != texts.len() {
            return Err(EmbedError::MalformedResponse(format!(
                "expected {} vectors, got {}",
                texts.len(),
                parsed.embeddings.len()
            )));
        }
        parsed
            .embeddings
            .into_iter()
            .map(|raw| {
                if raw.len() != self.dim {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.dim,
                        got: raw.len(),
                    });
                }
                if raw.iter().any(|x| !x.is_finite()) {
                    return Err(EmbedError::MalformedResponse(
                        "vector contains a non-finite component".into(),
                    ));
                }
                let components = raw
                    .into_iter()
                    .map(|x| F::from_f64(x).expect("finite f64 converts to Real scalar"))
                    .collect();
                Ok(EmbeddingVector::new(components).normalized())
            })
            .collect()
    }
}

/// Remote embedder that falls back to a local one when the service fails.
/// Both sides must agree on the dimension.
pub struct FallbackEmbedder<P, B> {
    primary: P,
    backup: B,
}

impl<P, B> FallbackEmbedder<P, B> {
    pub fn new(primary: P, backup: B) -> Self {
        Self { primary, backup }
    }
}

impl<F: Real, P: Embedder<F>, B: Embedder<F>> Embedder<F> for FallbackEmbedder<P, B> {
    fn dim(&self) -> usize {
        self.primary.dim()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<F>>, EmbedError> {
        match self.primary.embed_batch(texts) {
            Ok(v) => Ok(v),
            Err(EmbedError::EmptyBatch) => Err(EmbedError::EmptyBatch),
            Err(_) => self.backup.embed_batch(texts),
        }
    }
}
