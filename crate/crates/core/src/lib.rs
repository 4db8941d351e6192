//! State-indexed procedural memory for agents.
//!
//! The crate stores state-action-result experience entries and retrieves
//! them by jointly matching the environment state (feature-set overlap) and
//! the agent's internal state (embedding similarity). Around that core it
//! provides an append-only store with trajectory ingestion, a renderer for
//! the recalled-exemplar context block, a deterministic synthetic web-site
//! simulator with baseline and memory-augmented policies, and an evaluation
//! harness computing accuracy, best-of-n, reliability, and step-efficiency
//! metrics.
//!
//! Scoring kernels are generic over the scalar type (see [`scalar`]): exact
//! rationals for testing, `f32`/`f64` for serving. The pipeline's concrete
//! scalar is [`Score`].

pub mod embed;
pub mod eval;
pub mod hashing;
pub mod recall;
pub mod remote;
pub mod retrieval;
pub mod scalar;
pub mod similarity;
pub mod sim;
pub mod state;
pub mod store;

pub use embed::{CachingEmbedder, EmbedError, Embedder, EmbeddingVector, HashEmbedder, DEFAULT_EMBED_DIM};
pub use recall::{render_exemplars, RenderConfig, EMPTY_SECTION};
pub use remote::{FallbackEmbedder, RemoteEmbedder, EMBED_URL_ENV};
pub use retrieval::{
    brute_force_retrieve, retrieve, score_all, topk_indices, RetrievalError, RetrievalQuery,
    RetrievalResult, RetrievedEntry,
};
pub use scalar::{Real, Scalar};
pub use similarity::{env_score, inner_product, iou, length_overlap};
pub use state::{
    canonicalize_token, ActionKind, ActionRecord, EntryId, EnvState, FeatureToken, InternalState,
    MemoryEntry, StateError,
};
pub use store::{
    read_trajectories, write_trajectories, MemoryStore, NewEntry, StoreError, TrajectoryRecord,
    TrajectoryStep, STORE_FORMAT_VERSION,
};

/// Concrete score scalar used by the retrieval pipeline and harness.
pub type Score = f64;

/// Embedding vector over the pipeline scalar.
pub type Embedding = embed::EmbeddingVector<Score>;
