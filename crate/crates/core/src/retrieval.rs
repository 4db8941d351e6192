//! Procedural memory retrieval.
//!
//! Each entry is scored against the query on two axes: the environment score
//! (IoU of the pre-action state with the query state, weighted by length
//! overlap) and the internal score (inner product of internal-state
//! embeddings). Retrieval keeps the `k` entries with the highest environment
//! scores, reorders them by internal score descending, then drops entries
//! whose environment score falls below the threshold `tau`. The threshold is
//! applied *after* the top-k cut, so an entry clearing `tau` can still be
//! excluded by breadth; that order of operations is part of the contract.
//!
//! All ties break toward the smaller entry id, which makes results fully
//! deterministic. [`brute_force_retrieve`] is an independent oracle that
//! shares no selection code with [`retrieve`].

use std::cmp::Ordering;

use thiserror::Error;

use crate::embed::{EmbedError, Embedder};
use crate::scalar::{Real, Scalar};
use crate::similarity::{env_score, inner_product, iou, length_overlap};
use crate::state::{EntryId, EnvState, InternalState, MemoryEntry};

/// Hard cap on the oracle's input size; it exists for testing, not serving.
pub const BRUTE_FORCE_MAX_ENTRIES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RetrievalError {
    #[error("invalid retrieval query: {0}")]
    InvalidQuery(String),
    #[error("store too large for the brute-force oracle: {0} entries")]
    StoreTooLarge(usize),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Query states plus search breadth `k` and similarity threshold `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalQuery<F = f64> {
    query_env: EnvState,
    query_internal: InternalState,
    k: usize,
    tau: F,
}

impl<F: Real> RetrievalQuery<F> {
    /// Requires `k >= 1` and `tau` in `[0, 1]`.
    pub fn new(
        query_env: EnvState,
        query_internal: InternalState,
        k: usize,
        tau: F,
    ) -> Result<Self, RetrievalError> {
        if k < 1 {
            return Err(RetrievalError::InvalidQuery(
                "search breadth k must be at least 1".into(),
            ));
        }
        if !(tau >= F::zero() && tau <= F::one()) {
            return Err(RetrievalError::InvalidQuery(
                "similarity threshold tau must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            query_env,
            query_internal,
            k,
            tau,
        })
    }

    pub fn query_env(&self) -> &EnvState {
        &self.query_env
    }

    pub fn query_internal(&self) -> &InternalState {
        &self.query_internal
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau(&self) -> F {
        self.tau
    }
}

/// One retrieved entry with both scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedEntry<F = f64> {
    pub id: EntryId,
    pub env_score: F,
    pub internal_score: F,
}

/// Ordered retrieval output. The order is the contract: non-increasing
/// internal score, ties toward smaller id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RetrievalResult<F = f64> {
    hits: Vec<RetrievedEntry<F>>,
}

impl<F: Real> RetrievalResult<F> {
    pub fn hits(&self) -> &[RetrievedEntry<F>] {
        &self.hits
    }

    pub fn indices(&self) -> Vec<EntryId> {
        self.hits.iter().map(|h| h.id).collect()
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

fn cmp_scores<S: Scalar>(a: &S, b: &S) -> Ordering {
    a.partial_cmp(b)
        .expect("similarity scores are finite and comparable")
}

/// Score every entry against the query. Returns `(env, internal)` pairs
/// positionally aligned with `entries`.
pub fn score_all<F: Real>(
    entries: &[MemoryEntry],
    query: &RetrievalQuery<F>,
    embedder: &dyn Embedder<F>,
) -> Result<Vec<(F, F)>, RetrievalError> {
    if entries.is_empty() {
        return Ok(Vec::new());
    }
    let query_vec = embedder.embed_internal(query.query_internal())?;
    let texts: Vec<String> = entries.iter().map(|e| e.internal.as_text()).collect();
    let text_refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let entry_vecs = embedder.embed_batch(&text_refs)?;
    entries
        .iter()
        .zip(entry_vecs)
        .map(|(entry, vec)| {
            let s_env = env_score(&entry.env_pre, query.query_env());
            let s_int = inner_product(&vec, &query_vec)?;
            Ok((s_env, s_int))
        })
        .collect()
}

/// Positions of the `k` largest scores, ordered by score descending with ties
/// toward the smaller position. Returns all positions when `k >= n`.
pub fn topk_indices<S: Scalar>(scores: &[S], k: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    let mut positions: Vec<usize> = (0..scores.len()).collect();
    let by_rank = |a: &usize, b: &usize| cmp_scores(&scores[*b], &scores[*a]).then(a.cmp(b));
    if k < positions.len() {
        positions.select_nth_unstable_by(k - 1, by_rank);
        positions.truncate(k);
    }
    positions.sort_unstable_by(by_rank);
    positions
}

/// Retrieval over a store snapshot: top-k by environment score, reordered by
/// internal score descending, thresholded at `tau`.
pub fn retrieve<F: Real>(
    entries: &[MemoryEntry],
    query: &RetrievalQuery<F>,
    embedder: &dyn Embedder<F>,
) -> Result<RetrievalResult<F>, RetrievalError> {
    let pairs = score_all(entries, query, embedder)?;
    let env_scores: Vec<F> = pairs.iter().map(|p| p.0).collect();
    let top = topk_indices(&env_scores, query.k());
    let mut hits: Vec<RetrievedEntry<F>> = top
        .into_iter()
        .map(|pos| RetrievedEntry {
            id: entries[pos].id,
            env_score: pairs[pos].0,
            internal_score: pairs[pos].1,
        })
        .collect();
    hits.sort_by(|a, b| cmp_scores(&b.internal_score, &a.internal_score).then(a.id.cmp(&b.id)));
    hits.retain(|h| h.env_score >= query.tau());
    Ok(RetrievalResult { hits })
}

/// Test oracle: semantically identical to [`retrieve`], implemented by full
/// materialization and naive full sorts. Recomputes the kernels inline (in
/// the same arithmetic order, so float results agree bit-for-bit) and shares
/// no selection code with the production path.
pub fn brute_force_retrieve<F: Real>(
    entries: &[MemoryEntry],
    query: &RetrievalQuery<F>,
    embedder: &dyn Embedder<F>,
) -> Result<RetrievalResult<F>, RetrievalError> {
    if entries.len() > BRUTE_FORCE_MAX_ENTRIES {
        return Err(RetrievalError::StoreTooLarge(entries.len()));
    }
    let query_vec = embedder.embed_internal(query.query_internal())?;

    let mut scored: Vec<RetrievedEntry<F>> = Vec::with_capacity(entries.len());
    for entry in entries {
        let v: F = iou(&entry.env_pre, query.query_env());
        let l: F = length_overlap(entry.env_pre.len(), query.query_env().len());
        let s_env = v * l;
        let entry_vec = embedder.embed_text(&entry.internal.as_text())?;
        let s_int = inner_product(&entry_vec, &query_vec)?;
        scored.push(RetrievedEntry {
            id: entry.id,
            env_score: s_env,
            internal_score: s_int,
        });
    }

    scored.sort_by(|a, b| cmp_scores(&b.env_score, &a.env_score).then(a.id.cmp(&b.id)));
    scored.truncate(query.k());
    scored.sort_by(|a, b| cmp_scores(&b.internal_score, &a.internal_score).then(a.id.cmp(&b.id)));
    scored.retain(|h| h.env_score >= query.tau());
    Ok(RetrievalResult { hits: scored })
}
