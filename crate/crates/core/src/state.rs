//! Canonical representations of environment states, internal states, actions,
//! and memory entries.
//!
//! An environment state is a set of canonical feature tokens; set semantics
//! keep intersection-over-union well-defined and make state equality exact.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a memory entry. Assigned monotonically by the store.
pub type EntryId = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error("feature token is empty after canonicalization")]
    EmptyToken,
    #[error("directive must not be blank")]
    BlankDirective,
}

/// One canonical observation atom: trimmed, case-folded, single-spaced.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureToken(String);

impl FeatureToken {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for FeatureToken {
    type Error = StateError;

    fn try_from(raw: String) -> Result<Self, StateError> {
        canonicalize_token(&raw)
    }
}

impl From<FeatureToken> for String {
    fn from(token: FeatureToken) -> String {
        token.0
    }
}

impl fmt::Display for FeatureToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Canonicalize a raw token: trim, collapse internal whitespace to single
/// spaces, case-fold. Idempotent; rejects tokens that come out empty.
pub fn canonicalize_token(raw: &str) -> Result<FeatureToken, StateError> {
    let mut out = String::with_capacity(raw.len());
    for part in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for c in part.chars() {
            out.extend(c.to_lowercase());
        }
    }
    if out.is_empty() {
        return Err(StateError::EmptyToken);
    }
    Ok(FeatureToken(out))
}

/// A finite set of canonical feature tokens describing one observed
/// environment. `length` in scoring formulas is the set cardinality.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnvState {
    features: BTreeSet<FeatureToken>,
}

impl EnvState {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Build a state from raw observation strings. Tokens are canonicalized
    /// and deduplicated; blank strings contribute nothing to the observation.
    pub fn from_observation<S: AsRef<str>>(raw_tokens: &[S]) -> Self {
        let features = raw_tokens
            .iter()
            .filter_map(|raw| canonicalize_token(raw.as_ref()).ok())
            .collect();
        Self { features }
    }

    pub fn from_tokens<I: IntoIterator<Item = FeatureToken>>(tokens: I) -> Self {
        Self {
            features: tokens.into_iter().collect(),
        }
    }

    /// Copy of this state with one extra token.
    pub fn with_token(&self, token: FeatureToken) -> Self {
        let mut features = self.features.clone();
        features.insert(token);
        Self { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn contains(&self, token: &FeatureToken) -> bool {
        self.features.contains(token)
    }

    /// Tokens in canonical (sorted) order.
    pub fn tokens(&self) -> impl Iterator<Item = &FeatureToken> {
        self.features.iter()
    }

    /// Tokens as plain strings in canonical order.
    pub fn token_strings(&self) -> Vec<String> {
        self.features.iter().map(|t| t.0.clone()).collect()
    }

    pub fn intersection_size(&self, other: &EnvState) -> usize {
        if self.len() <= other.len() {
            self.features.intersection(&other.features).count()
        } else {
            other.features.intersection(&self.features).count()
        }
    }

    pub fn union_size(&self, other: &EnvState) -> usize {
        self.len() + other.len() - self.intersection_size(other)
    }
}

/// The agent's objective and progress at one moment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InternalState {
    directive: String,
    progress_note: String,
}

impl InternalState {
    /// `directive` must not be blank; `progress_note` may be empty.
    pub fn new(
        directive: impl Into<String>,
        progress_note: impl Into<String>,
    ) -> Result<Self, StateError> {
        let directive = directive.into();
        if directive.trim().is_empty() {
            return Err(StateError::BlankDirective);
        }
        Ok(Self {
            directive,
            progress_note: progress_note.into(),
        })
    }

    pub fn directive(&self) -> &str {
        &self.directive
    }

    pub fn progress_note(&self) -> &str {
        &self.progress_note
    }

    /// Text form consumed by embedders.
    pub fn as_text(&self) -> String {
        if self.progress_note.is_empty() {
            self.directive.clone()
        } else {
            format!("{}\n{}", self.directive, self.progress_note)
        }
    }
}

/// Registered action vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Click,
    Type,
    Navigate,
    Submit,
    Back,
}

impl ActionKind {
    pub const ALL: [ActionKind; 5] = [
        ActionKind::Click,
        ActionKind::Type,
        ActionKind::Navigate,
        ActionKind::Submit,
        ActionKind::Back,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Click => "click",
            ActionKind::Type => "type",
            ActionKind::Navigate => "navigate",
            ActionKind::Submit => "submit",
            ActionKind::Back => "back",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One concrete action: kind, target element, optional free-text argument.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionRecord {
    pub kind: ActionKind,
    pub target: FeatureToken,
    #[serde(rename = "arg")]
    pub argument: Option<String>,
}

impl ActionRecord {
    pub fn new(kind: ActionKind, target: FeatureToken, argument: Option<String>) -> Self {
        Self {
            kind,
            target,
            argument,
        }
    }
}

impl fmt::Display for ActionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.argument {
            Some(arg) => write!(f, "{} \"{}\" = \"{}\"", self.kind, self.target, arg),
            None => write!(f, "{} \"{}\"", self.kind, self.target),
        }
    }
}

/// The unit of procedural memory: what the environment looked like, what the
/// agent was doing, what it did, and what the environment became.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryEntry {
    pub id: EntryId,
    pub env_pre: EnvState,
    pub internal: InternalState,
    pub action: ActionRecord,
    pub env_post: EnvState,
    pub episode_success: bool,
    /// Unix seconds. Informational only; never affects retrieval order.
    pub created_at: i64,
}
