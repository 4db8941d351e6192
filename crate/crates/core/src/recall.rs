//! Rendering of retrieved entries into the procedural-memory text block
//! consumed by an action-selection step.
//!
//! Layout (byte-stable for identical inputs):
//!
//! ```text
//! ## Procedural memory
//! 1. outcome: success
//!    state: alpha, beta (+2 more)
//!    goal: buy red shoes; progress: step 3
//!    action: click "checkout button"
//!    result: beta, confirmation page
//! ```
//!
//! An empty retrieval renders the sentinel section below. Exemplars keep
//! retrieval order; truncation only ever drops the tail.

use crate::state::{EnvState, MemoryEntry};

/// Rendered when nothing was retrieved.
pub const EMPTY_SECTION: &str = "## Procedural memory\n(no procedural memories retrieved)\n";

const SECTION_HEADER: &str = "## Procedural memory";

/// Rendering knobs. `max_exemplars` must be at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderConfig {
    pub max_exemplars: usize,
    pub max_chars_per_state: usize,
    /// Keep exemplars from failed episodes (labeled). When false they are
    /// filtered out before the count cap is applied.
    pub include_failures: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            max_exemplars: 8,
            max_chars_per_state: 400,
            include_failures: true,
        }
    }
}

/// Comma-joined sorted feature tokens, truncated to roughly `max_chars` with
/// an omitted-token count suffix.
fn summarize_state(state: &EnvState, max_chars: usize) -> String {
    if state.is_empty() {
        return "(empty)".to_owned();
    }
    let mut out = String::new();
    let mut omitted = 0usize;
    for token in state.tokens() {
        let sep = if out.is_empty() { 0 } else { 2 };
        if out.len() + sep + token.as_str().len() <= max_chars {
            if sep > 0 {
                out.push_str(", ");
            }
            out.push_str(token.as_str());
        } else {
            omitted += 1;
        }
    }
    if out.is_empty() {
        return format!("({} features)", state.len());
    }
    if omitted > 0 {
        out.push_str(&format!(" (+{omitted} more)"));
    }
    out
}

/// Render retrieved entries (in retrieval order) into the context block.
pub fn render_exemplars(entries: &[&MemoryEntry], config: &RenderConfig) -> String {
    debug_assert!(config.max_exemplars >= 1);
    let cap = config.max_exemplars.max(1);
    let kept: Vec<&MemoryEntry> = entries
        .iter()
        .copied()
        .filter(|e| config.include_failures || e.episode_success)
        .take(cap)
        .collect();
    if kept.is_empty() {
        return EMPTY_SECTION.to_owned();
    }

    let mut out = String::from(SECTION_HEADER);
    out.push('\n');
    for (i, entry) in kept.iter().enumerate() {
        let outcome = if entry.episode_success {
            "success"
        } else {
            "failure"
        };
        out.push_str(&format!("{}. outcome: {outcome}\n", i + 1));
        out.push_str(&format!(
            "   state: {}\n",
            summarize_state(&entry.env_pre, config.max_chars_per_state)
        ));
        let progress = entry.internal.progress_note();
        if progress.is_empty() {
            out.push_str(&format!("   goal: {}\n", entry.internal.directive()));
        } else {
            out.push_str(&format!(
                "   goal: {}; progress: {progress}\n",
                entry.internal.directive()
            ));
        }
        out.push_str(&format!("   action: {}\n", entry.action));
        out.push_str(&format!(
            "   result: {}\n",
            summarize_state(&entry.env_post, config.max_chars_per_state)
        ));
    }
    out
}
