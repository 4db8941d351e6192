//! Episode execution: step a policy through a site until the goal, a dead
//! end, or the step budget.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::policy::{baseline_policy, memory_policy, PolicyParams};
use super::{NodeId, SimError, SiteGraph, TaskSpec};
use crate::embed::Embedder;
use crate::retrieval::{retrieve, RetrievalQuery};
use crate::state::{canonicalize_token, ActionRecord, EnvState, InternalState, MemoryEntry};
use crate::store::{MemoryStore, TrajectoryRecord, TrajectoryStep};

/// Outcome of one episode. Failures are results, not errors. The trajectory
/// satisfies the store's chaining invariant; it is empty only in degenerate
/// zero-step episodes, which have nothing to ingest.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub success: bool,
    pub steps_taken: usize,
    pub trajectory: TrajectoryRecord,
}

/// Retrieval wiring for the memory policy.
pub struct MemoryBinding<'a> {
    pub store: &'a MemoryStore,
    pub k: usize,
    pub tau: f64,
    pub embedder: &'a dyn Embedder<f64>,
}

pub enum Policy<'a> {
    /// Replay a fixed action sequence; an unavailable or exhausted script
    /// step fails the episode.
    Scripted(&'a [ActionRecord]),
    Baseline(PolicyParams),
    Memory {
        params: PolicyParams,
        binding: MemoryBinding<'a>,
    },
}

/// What the agent observes at `node` after `step` actions: the page features
/// plus a session-depth marker, so revisits at different times are similar
/// but not identical states.
pub fn episode_observation(site: &SiteGraph, node: NodeId, step: usize) -> EnvState {
    site.observation(node)
        .with_token(canonicalize_token(&format!("depth d{step:03}")).expect("non-blank"))
}

/// Run one episode of `task` on `site` under `policy`, with all randomness
/// drawn from a generator seeded by `seed`.
pub fn run_episode(
    site: &SiteGraph,
    task: &TaskSpec,
    policy: &Policy<'_>,
    seed: u64,
) -> Result<EpisodeResult, SimError> {
    let n = site.node_count();
    if task.start as usize >= n || task.goal as usize >= n {
        return Err(SimError::TaskMismatch {
            task_id: task.task_id.clone(),
            message: "start or goal node is not part of the site".into(),
        });
    }

    let dist_to_goal = site.distances_to(task.goal);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut node = task.start;
    let mut step = 0usize;
    let mut steps: Vec<TrajectoryStep> = Vec::new();

    let success = loop {
        if task.is_goal(node) {
            break true;
        }
        if step >= task.max_steps {
            break false;
        }
        let actions = site.actions(node);
        if actions.is_empty() {
            break false;
        }

        let obs = episode_observation(site, node, step);
        let progress = format!("step {step}");
        let choice = match policy {
            Policy::Scripted(script) => {
                match script
                    .get(step)
                    .and_then(|want| actions.iter().position(|(a, _)| a == want))
                {
                    Some(idx) => idx,
                    None => break false,
                }
            }
            Policy::Baseline(params) => baseline_policy(actions, &dist_to_goal, params, &mut rng),
            Policy::Memory { params, binding } => {
                let internal = InternalState::new(&task.directive, &progress)
                    .expect("task directives are non-blank");
                let query = RetrievalQuery::new(obs.clone(), internal, binding.k, binding.tau)?;
                let result = retrieve(binding.store.entries(), &query, binding.embedder)?;
                let exemplars: Vec<&MemoryEntry> = result
                    .hits()
                    .iter()
                    .map(|h| binding.store.entry(h.id).expect("retrieved id exists"))
                    .collect();
                memory_policy(actions, &dist_to_goal, params, &exemplars, &mut rng)
            }
        };

        let (action, next) = &actions[choice];
        let post = episode_observation(site, *next, step + 1);
        steps.push(TrajectoryStep {
            obs: obs.token_strings(),
            progress,
            action: action.clone(),
            post_obs: post.token_strings(),
        });
        node = *next;
        step += 1;
    };

    Ok(EpisodeResult {
        success,
        steps_taken: step,
        trajectory: TrajectoryRecord {
            episode_id: format!("{}-s{}", task.task_id, seed),
            directive: task.directive.clone(),
            steps,
            success,
        },
    })
}
