//! Internal-state embedding: the vector type, the embedder interface, the
//! deterministic hashing reference embedder, and a memoizing wrapper.

use std::collections::HashMap;
use std::marker::PhantomData;
use std::sync::Mutex;

use thiserror::Error;

use crate::hashing::fnv1a64;
use crate::scalar::Real;
use crate::state::InternalState;

/// Default embedding dimension. Large enough that desk-scale vocabularies
/// rarely collide into the same bucket.
pub const DEFAULT_EMBED_DIM: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmbedError {
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding batch must not be empty")]
    EmptyBatch,
    #[error("embedding endpoint transport failure: {0}")]
    Transport(String),
    #[error("malformed embedding response: {0}")]
    MalformedResponse(String),
}

/// Fixed-dimension real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<F = f64> {
    components: Vec<F>,
}

impl<F: Real> EmbeddingVector<F> {
    pub fn new(components: Vec<F>) -> Self {
        Self { components }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            components: vec![F::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[F] {
        &self.components
    }

    pub fn l2_norm(&self) -> F {
        self.components
            .iter()
            .fold(F::zero(), |acc, x| acc + *x * *x)
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|x| x.is_zero())
    }

    /// Scale to unit L2 norm. The zero vector stays zero.
    pub fn normalized(mut self) -> Self {
        let norm = self.l2_norm();
        if !norm.is_zero() {
            for x in &mut self.components {
                *x = *x / norm;
            }
        }
        self
    }
}

/// Anything that can turn internal states into vectors of a fixed dimension.
pub trait Embedder<F: Real = f64> {
    fn dim(&self) -> usize;

    /// One vector per input text, in order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<F>>, EmbedError>;

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector<F>, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        out.pop().ok_or_else(|| {
            EmbedError::MalformedResponse("embedder returned no vector for a single text".into())
        })
    }

    fn embed_internal(&self, state: &InternalState) -> Result<EmbeddingVector<F>, EmbedError> {
        self.embed_text(&state.as_text())
    }
}

impl<F: Real, E: Embedder<F> + ?Sized> Embedder<F> for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<F>>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

/// Case-folded whitespace tokens of a text.
pub(crate) fn text_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(|t| t.to_lowercase())
}

/// Deterministic feature-hashing embedder: signed bag of tokens.
///
/// Each token is hashed with a fixed 64-bit hash; the hash picks a bucket in
/// `[0, dim)` and one hash bit picks the sign. The accumulated vector is
/// L2-normalized, so inner products of its outputs are cosine similarities.
/// Empty text embeds to the zero vector.
#[derive(Debug, Clone)]
pub struct HashEmbedder<F = f64> {
    dim: usize,
    _scalar: PhantomData<F>,
}

impl<F> HashEmbedder<F> {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "embedding dimension must be at least 1");
        Self {
            dim,
            _scalar: PhantomData,
        }
    }
}

impl<F> Default for HashEmbedder<F> {
    fn default() -> Self {
        Self::new(DEFAULT_EMBED_DIM)
    }
}

/// Bucket and sign assigned to a token by the hashing embedder.
pub fn hash_bucket(token: &str, dim: usize) -> (usize, bool) {
    let h = fnv1a64(token.as_bytes());
    ((h % dim as u64) as usize, h & (1 << 63) != 0)
}

impl<F: Real> Embedder<F> for HashEmbedder<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<F>>, EmbedError> {
        Ok(texts
            .iter()
            .map(|text| {
                let mut v = vec![F::zero(); self.dim];
                for token in text_tokens(text) {
                    let (bucket, negative) = hash_bucket(&token, self.dim);
                    let delta = if negative { -F::one() } else { F::one() };
                    v[bucket] = v[bucket] + delta;
                }
                EmbeddingVector::new(v).normalized()
            })
            .collect())
    }
}

/// Memoizing wrapper around any embedder. Same outputs, fewer calls; batch
/// requests forward only the cache misses.
pub struct CachingEmbedder<E, F = f64> {
    inner: E,
    cache: Mutex<HashMap<String, EmbeddingVector<F>>>,
}

impl<E, F> CachingEmbedder<E, F> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl<F: Real, E: Embedder<F>> Embedder<F> for CachingEmbedder<E, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<F>>, EmbedError> {
        let mut out: Vec<Option<EmbeddingVector<F>>> = vec![None; texts.len()];
        let mut miss_positions = Vec::new();
        {
            let cache = self.cache.lock().expect("embedding cache poisoned");
            for (i, text) in texts.iter().enumerate() {
                match cache.get(*text) {
                    Some(v) => out[i] = Some(v.clone()),
                    None => miss_positions.push(i),
                }
            }
        }
        if !miss_positions.is_empty() {
            let misses: Vec<&str> = miss_positions.iter().map(|&i| texts[i]).collect();
            let fresh = self.inner.embed_batch(&misses)?;
            if fresh.len() != misses.len() {
                return Err(EmbedError::MalformedResponse(format!(
                    "expected {} vectors, got {}",
                    misses.len(),
                    fresh.len()
                )));
            }
            let mut cache = self.cache.lock().expect("embedding cache poisoned");
            for (&i, v) in miss_positions.iter().zip(fresh) {
                cache.insert(texts[i].to_owned(), v.clone());
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("all slots filled")).collect())
    }
}
