//! Step policies: a noisy goal-directed baseline and the memory-augmented
//! policy that follows retrieved successful exemplars.
//!
//! Both are mechanistic proxies for an agent's action selector: the baseline
//! models a capable-but-stochastic agent via a noisy distance heuristic plus
//! an epsilon of uniform error; the memory policy biases decisions toward
//! actions that previously succeeded in similar states and away from actions
//! that previously failed there.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NodeId;
use crate::state::{ActionRecord, MemoryEntry};

/// Cost assigned to actions whose destination cannot reach the goal.
const UNREACHABLE_COST: f64 = 1e9;

/// Weight multiplier applied in the fallback to actions cited by
/// failed-episode exemplars.
const FAILURE_VETO_FACTOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    /// Probability of a uniformly random action.
    pub epsilon: f64,
    /// Scale of the uniform noise added to the distance heuristic.
    pub heuristic_noise: f64,
    /// Probability of following the highest-ranked successful exemplar whose
    /// action is available.
    pub p_follow: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            epsilon: 0.35,
            heuristic_noise: 7.5,
            p_follow: 0.9,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("p_follow", self.p_follow),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.heuristic_noise >= 0.0) {
            return Err(format!(
                "heuristic_noise must be non-negative, got {}",
                self.heuristic_noise
            ));
        }
        Ok(())
    }
}

/// Noisy cost estimate per action: true goal distance of the destination
/// plus scaled uniform noise. Consumes one RNG draw per action.
fn heuristic_estimates(
    actions: &[(ActionRecord, NodeId)],
    dist_to_goal: &[u32],
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    actions
        .iter()
        .map(|&(_, dest)| {
            let d = dist_to_goal[dest as usize];
            let base = if d == u32::MAX {
                UNREACHABLE_COST
            } else {
                f64::from(d)
            };
            base + noise * rng.random::<f64>()
        })
        .collect()
}

fn greedy_index(estimates: &[f64]) -> usize {
    let mut best = 0;
    for (i, est) in estimates.iter().enumerate().skip(1) {
        if *est < estimates[best] {
            best = i;
        }
    }
    best
}

/// Sample an index proportionally to `weights` (not necessarily normalized).
pub fn weighted_choice(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "weights must not all be zero");
    let mut draw = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        draw -= w;
        if draw < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// No-memory step policy. With probability `epsilon` picks uniformly among
/// the available actions; otherwise greedily minimizes the noisy distance
/// estimate (ties toward the smaller action index). Returns the chosen
/// action's index.
pub fn baseline_policy(
    actions: &[(ActionRecord, NodeId)],
    dist_to_goal: &[u32],
    params: &PolicyParams,
    rng: &mut ChaCha8Rng,
) -> usize {
    debug_assert!(!actions.is_empty());
    if rng.random::<f64>() < params.epsilon {
        return rng.random_range(0..actions.len());
    }
    let estimates = heuristic_estimates(actions, dist_to_goal, params.heuristic_noise, rng);
    greedy_index(&estimates)
}

/// Memory-augmented step policy.
///
/// If any retrieved exemplar came from a successful episode and its action is
/// available here, take the highest-ranked such action with probability
/// `p_follow`. Otherwise fall back to the baseline selection distribution,
/// with actions cited by failed-episode exemplars down-weighted by 0.1.
/// With no exemplars at all this delegates to [`baseline_policy`] on the
/// same RNG stream.
pub fn memory_policy(
    actions: &[(ActionRecord, NodeId)],
    dist_to_goal: &[u32],
    params: &PolicyParams,
    exemplars: &[&MemoryEntry],
    rng: &mut ChaCha8Rng,
) -> usize {
    debug_assert!(!actions.is_empty());
    if exemplars.is_empty() {
        return baseline_policy(actions, dist_to_goal, params, rng);
    }

    let followed = exemplars.iter().find_map(|e| {
        if !e.episode_success {
            return None;
        }
        actions.iter().position(|(a, _)| *a == e.action)
    });
    if let Some(idx) = followed {
        if rng.random::<f64>() < params.p_follow {
            return idx;
        }
    }

    // Baseline selection expressed as explicit weights so vetoes can apply:
    // the greedy pick carries the (1 - epsilon) mass plus its uniform share.
    let estimates = heuristic_estimates(actions, dist_to_goal, params.heuristic_noise, rng);
    let greedy = greedy_index(&estimates);
    let uniform = params.epsilon / actions.len() as f64;
    let mut weights = vec![uniform; actions.len()];
    weights[greedy] += 1.0 - params.epsilon;

    // An action is vetoed when its retrieved evidence is purely negative:
    // cited by failed-episode exemplars and by no successful one.
    let mut cited_failed = vec![false; actions.len()];
    let mut cited_success = vec![false; actions.len()];
    for e in exemplars {
        if let Some(idx) = actions.iter().position(|(a, _)| *a == e.action) {
            if e.episode_success {
                cited_success[idx] = true;
            } else {
                cited_failed[idx] = true;
            }
        }
    }
    for idx in 0..actions.len() {
        if cited_failed[idx] && !cited_success[idx] {
            weights[idx] *= FAILURE_VETO_FACTOR;
        }
    }
    weighted_choice(&weights, rng)
}
