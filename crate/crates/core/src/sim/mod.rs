//! Deterministic synthetic web-like environment.
//!
//! A site is a directed graph of pages. Each node carries a feature-set
//! observation; each edge is a concrete action. The graph is a hub: a small
//! category-index tree fans out to one section per task, and each section is
//! a short forward flow (its task's happy path) decorated with distractor
//! actions that loop back to earlier pages of the flow or dead-end on
//! penalty pages. Tasks start at their section's entry page (a deep link)
//! and must reach a goal page within a step budget.
//!
//! Everything is generated from a seed with a counter-based RNG, so equal
//! seeds give deeply equal sites.

mod episode;
mod policy;

pub use episode::{episode_observation, run_episode, EpisodeResult, MemoryBinding, Policy};
pub use policy::{baseline_policy, memory_policy, weighted_choice, PolicyParams};

use std::collections::{HashSet, VecDeque};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::RetrievalError;
use crate::state::{canonicalize_token, ActionKind, ActionRecord, EnvState};

pub type NodeId = u32;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter {name}: {message}")]
    InvalidParam {
        name: &'static str,
        message: String,
    },
    #[error("site generation failed: {0}")]
    GenerationFailed(String),
    #[error("task {task_id} does not belong to this site: {message}")]
    TaskMismatch { task_id: String, message: String },
    #[error("invalid site: {0}")]
    InvalidSite(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed site file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// One page: its observation and its outgoing actions in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteNode {
    pub id: NodeId,
    pub observation: EnvState,
    pub actions: Vec<(ActionRecord, NodeId)>,
}

/// A generated site. Node positions equal node ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteGraph {
    pub seed: u64,
    pub start: NodeId,
    pub nodes: Vec<SiteNode>,
    /// Dead-end pages reached only through distractor actions.
    pub penalty_nodes: Vec<NodeId>,
}

/// One task: reach `goal` from `start` within `max_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub directive: String,
    pub start: NodeId,
    pub goal: NodeId,
    pub max_steps: usize,
    /// Shortest-path length from start to goal, recorded at generation time.
    pub optimal_steps: usize,
}

impl TaskSpec {
    pub fn is_goal(&self, node: NodeId) -> bool {
        node == self.goal
    }
}

/// Size and shape knobs for [`generate_site`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteParams {
    /// Total node count, 10..=500.
    pub nodes: usize,
    /// Out-degree of main pages, 2..=8.
    pub branching: usize,
    /// Number of tasks to derive.
    pub tasks: usize,
    /// Preferred minimum shortest-path length to a goal.
    pub min_goal_depth: usize,
    /// Step budget = optimal * factor + slack.
    pub max_steps_factor: usize,
    pub max_steps_slack: usize,
    /// Fraction of nodes reserved as penalty dead ends.
    pub penalty_fraction: f64,
}

impl Default for SiteParams {
    fn default() -> Self {
        Self {
            nodes: 100,
            branching: 4,
            tasks: 20,
            min_goal_depth: 4,
            max_steps_factor: 1,
            max_steps_slack: 12,
            penalty_fraction: 0.04,
        }
    }
}

/// Tasks sharing one section flow (a shallow and a deep goal on one chain).
const TASKS_PER_SECTION: usize = 2;

/// Minimum pages per section: an entry plus room for two goal depths.
const MIN_SECTION_SIZE: usize = 6;

/// Tokens a section draws its page features from.
const SECTION_POOL_SIZE: usize = 8;

/// Chance that a non-entry section node carries an extra penalty distractor
/// beyond the coverage pass.
const EXTRA_PENALTY_EDGE_PROB: f64 = 0.03;

const VOCAB: [&str; 24] = [
    "search box",
    "nav bar",
    "login form",
    "cart icon",
    "footer links",
    "promo banner",
    "product grid",
    "filter panel",
    "checkout button",
    "user menu",
    "breadcrumb trail",
    "rating stars",
    "price label",
    "stock badge",
    "help widget",
    "cookie notice",
    "image carousel",
    "review list",
    "size selector",
    "shipping note",
    "coupon field",
    "wishlist star",
    "compare toggle",
    "newsletter form",
];

impl SiteGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> &SiteNode {
        &self.nodes[id as usize]
    }

    pub fn actions(&self, id: NodeId) -> &[(ActionRecord, NodeId)] {
        &self.nodes[id as usize].actions
    }

    pub fn observation(&self, id: NodeId) -> &EnvState {
        &self.nodes[id as usize].observation
    }

    /// Unweighted shortest-path distance from every node to `goal`
    /// (`u32::MAX` when unreachable).
    pub fn distances_to(&self, goal: NodeId) -> Vec<u32> {
        let n = self.node_count();
        let mut incoming: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for node in &self.nodes {
            for &(_, dest) in &node.actions {
                incoming[dest as usize].push(node.id);
            }
        }
        let mut dist = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        dist[goal as usize] = 0;
        queue.push_back(goal);
        while let Some(v) = queue.pop_front() {
            for &src in &incoming[v as usize] {
                if dist[src as usize] == u32::MAX {
                    dist[src as usize] = dist[v as usize] + 1;
                    queue.push_back(src);
                }
            }
        }
        dist
    }

    /// Unweighted shortest-path distance from `src` to every node.
    pub fn distances_from(&self, src: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.node_count()];
        let mut queue = VecDeque::new();
        dist[src as usize] = 0;
        queue.push_back(src);
        while let Some(v) = queue.pop_front() {
            for &(_, dest) in self.actions(v) {
                if dist[dest as usize] == u32::MAX {
                    dist[dest as usize] = dist[v as usize] + 1;
                    queue.push_back(dest);
                }
            }
        }
        dist
    }

    /// Structural invariants: ids positional, transitions in range and
    /// unique per node, every node reachable from start, observations
    /// pairwise distinct.
    pub fn validate(&self) -> Result<(), SimError> {
        let n = self.node_count();
        if n == 0 {
            return Err(SimError::InvalidSite("site has no nodes".into()));
        }
        if self.start as usize >= n {
            return Err(SimError::InvalidSite("start node out of range".into()));
        }
        let mut observations = HashSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id as usize != i {
                return Err(SimError::InvalidSite(format!(
                    "node id {} at position {i}",
                    node.id
                )));
            }
            let mut seen_actions = HashSet::new();
            for (action, dest) in &node.actions {
                if *dest as usize >= n {
                    return Err(SimError::InvalidSite(format!(
                        "node {} has an edge to missing node {dest}",
                        node.id
                    )));
                }
                if !seen_actions.insert(action) {
                    return Err(SimError::InvalidSite(format!(
                        "node {} has a duplicate action",
                        node.id
                    )));
                }
            }
            if !observations.insert(node.observation.token_strings()) {
                return Err(SimError::InvalidSite(format!(
                    "node {} duplicates another node's observation",
                    node.id
                )));
            }
        }
        let dist = self.distances_from(self.start);
        if let Some(unreached) = dist.iter().position(|&d| d == u32::MAX) {
            return Err(SimError::InvalidSite(format!(
                "node {unreached} is unreachable from start"
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SiteFile {
    site: SiteGraph,
    tasks: Vec<TaskSpec>,
}

/// Write a site and its tasks as a JSON fixture.
pub fn save_site(
    path: impl AsRef<Path>,
    site: &SiteGraph,
    tasks: &[TaskSpec],
) -> Result<(), SimError> {
    let file = SiteFile {
        site: site.clone(),
        tasks: tasks.to_vec(),
    };
    std::fs::write(path.as_ref(), serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// Load a site fixture, revalidating its invariants.
pub fn load_site(path: impl AsRef<Path>) -> Result<(SiteGraph, Vec<TaskSpec>), SimError> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let file: SiteFile = serde_json::from_str(&text)?;
    file.site.validate()?;
    for task in &file.tasks {
        if task.goal as usize >= file.site.node_count()
            || task.start as usize >= file.site.node_count()
        {
            return Err(SimError::InvalidSite(format!(
                "task {} references a missing node",
                task.task_id
            )));
        }
    }
    Ok((file.site, file.tasks))
}

fn token(text: &str) -> crate::state::FeatureToken {
    canonicalize_token(text).expect("generated tokens are non-blank")
}

fn range_err(name: &'static str, message: String) -> SimError {
    SimError::InvalidParam { name, message }
}

/// Generate a site and its task list deterministically from `seed`.
pub fn generate_site(seed: u64, params: &SiteParams) -> Result<(SiteGraph, Vec<TaskSpec>), SimError> {
    if !(10..=500).contains(&params.nodes) {
        return Err(range_err(
            "nodes",
            format!("must lie in 10..=500, got {}", params.nodes),
        ));
    }
    if !(2..=8).contains(&params.branching) {
        return Err(range_err(
            "branching",
            format!("must lie in 2..=8, got {}", params.branching),
        ));
    }
    if params.tasks == 0 {
        return Err(range_err("tasks", "must be at least 1".into()));
    }
    if !(0.0..0.5).contains(&params.penalty_fraction) {
        return Err(range_err(
            "penalty_fraction",
            format!("must lie in [0, 0.5), got {}", params.penalty_fraction),
        ));
    }
    if params.max_steps_factor == 0 {
        return Err(range_err("max_steps_factor", "must be at least 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = params.branching;
    let n = params.nodes;
    let sections = params.tasks.div_ceil(TASKS_PER_SECTION);
    let n_penalty = ((n as f64 * params.penalty_fraction).round() as usize).max(1);
    // Hub: a b-ary index tree whose leaves are the section entries.
    let n_hub = if sections == 1 {
        0
    } else {
        sections.div_ceil(b.max(2) - 1).max(1)
    };
    let n_section_total = n
        .checked_sub(n_hub + n_penalty)
        .unwrap_or(0);
    if n_section_total < MIN_SECTION_SIZE * sections {
        return Err(SimError::GenerationFailed(format!(
            "{n} nodes cannot host {} tasks: {n_hub} hub + {n_penalty} penalty nodes \
             leave {n_section_total} section nodes, need at least {}",
            params.tasks,
            MIN_SECTION_SIZE * sections
        )));
    }

    // Section layout: contiguous blocks after the hub, sizes as even as
    // possible.
    let base_size = n_section_total / sections;
    let remainder = n_section_total % sections;
    let mut section_bounds = Vec::with_capacity(sections); // (base, size)
    let mut cursor = n_hub;
    for s in 0..sections {
        let size = base_size + usize::from(s < remainder);
        section_bounds.push((cursor, size));
        cursor += size;
    }
    let penalty_base = cursor;

    // Observations. A unique page token keeps nodes pairwise distinct; a
    // per-section zone token and vocabulary pool give pages of one flow high
    // overlap and pages of different flows low overlap.
    let mut observations: Vec<EnvState> = vec![EnvState::empty(); n];
    for h in 0..n_hub {
        let mut tokens = vec![
            token(&format!("page p{h:03}")),
            token("zone hub"),
            token("site directory"),
        ];
        tokens.push(token(VOCAB[rng.random_range(0..VOCAB.len())]));
        observations[h] = EnvState::from_tokens(tokens);
    }
    for (s, &(base, size)) in section_bounds.iter().enumerate() {
        let pool: Vec<&str> = rand::seq::index::sample(&mut rng, VOCAB.len(), SECTION_POOL_SIZE)
            .into_iter()
            .map(|i| VOCAB[i])
            .collect();
        for g in base..base + size {
            let mut tokens = vec![
                token(&format!("page p{g:03}")),
                token(&format!("zone z{s:02}")),
            ];
            let extra = rng.random_range(3..=6);
            for idx in rand::seq::index::sample(&mut rng, pool.len(), extra) {
                tokens.push(token(pool[idx]));
            }
            observations[g] = EnvState::from_tokens(tokens);
        }
    }
    for j in 0..n_penalty {
        let mut tokens = vec![
            token(&format!("page e{j:03}")),
            token("error banner"),
            token("warning modal"),
        ];
        tokens.push(token(VOCAB[rng.random_range(0..VOCAB.len())]));
        observations[penalty_base + j] = EnvState::from_tokens(tokens);
    }

    // Edges.
    let mut targets: Vec<Vec<NodeId>> = vec![Vec::new(); n];

    // Hub tree: every hub node and section entry hangs off an earlier hub
    // node; out-degrees stay within the branching cap.
    if n_hub > 0 {
        let mut pool: VecDeque<NodeId> = (1..n_hub as NodeId)
            .chain(section_bounds.iter().map(|&(base, _)| base as NodeId))
            .collect();
        for h in 0..n_hub {
            while targets[h].len() < b {
                match pool.pop_front() {
                    Some(child) => targets[h].push(child),
                    None => break,
                }
            }
        }
        if !pool.is_empty() {
            return Err(SimError::GenerationFailed(
                "hub tree capacity miscomputed".into(),
            ));
        }
    }

    // Section flows: a forward chain (the happy path) plus loop-back
    // distractors. Entry pages stay clean so every episode gets off the
    // ground; deeper pages get a near-back link and a link all the way back
    // to the entry, so wandering is costly.
    for &(base, size) in &section_bounds {
        for j in 1..size {
            let g = base + j;
            if j + 1 < size {
                targets[g].push((g + 1) as NodeId);
            }
            if b >= 3 {
                let dest = (base + rng.random_range(j.saturating_sub(2)..j)) as NodeId;
                if !targets[g].contains(&dest) {
                    targets[g].push(dest);
                }
            }
            if b >= 4 && j >= 3 && targets[g].len() < b - 1 {
                let dest = base as NodeId;
                if !targets[g].contains(&dest) {
                    targets[g].push(dest);
                }
            }
        }
        // Entry keeps a single obvious forward link.
        targets[base].push((base + 1) as NodeId);
    }

    // Penalty coverage: every penalty page gets at least one incoming
    // distractor from a non-entry section node, then a sprinkle of extras.
    let penalty_sources: Vec<usize> = section_bounds
        .iter()
        .flat_map(|&(base, size)| (base + 1..base + size))
        .collect();
    for j in 0..n_penalty {
        let with_room: Vec<usize> = penalty_sources
            .iter()
            .copied()
            .filter(|&g| targets[g].len() < b)
            .collect();
        if with_room.is_empty() {
            return Err(SimError::GenerationFailed(
                "no spare branching capacity for penalty edges".into(),
            ));
        }
        let src = with_room[rng.random_range(0..with_room.len())];
        targets[src].push((penalty_base + j) as NodeId);
    }
    for &g in &penalty_sources {
        if targets[g].len() < b && rng.random::<f64>() < EXTRA_PENALTY_EDGE_PROB {
            let dest = (penalty_base + rng.random_range(0..n_penalty)) as NodeId;
            if !targets[g].contains(&dest) {
                targets[g].push(dest);
            }
        }
    }

    // Label edges with actions. Targets are unique per node, so actions are.
    let forward_kinds = [
        ActionKind::Navigate,
        ActionKind::Click,
        ActionKind::Submit,
        ActionKind::Type,
    ];
    let mut nodes = Vec::with_capacity(n);
    for (g, observation) in observations.into_iter().enumerate() {
        let mut actions = Vec::new();
        for &dest in &targets[g] {
            let d = dest as usize;
            let (kind, target_text) = if d >= penalty_base {
                (ActionKind::Click, format!("goto e{:03}", d - penalty_base))
            } else if d < g {
                (ActionKind::Back, format!("goto p{d:03}"))
            } else {
                (
                    forward_kinds[rng.random_range(0..forward_kinds.len())],
                    format!("goto p{d:03}"),
                )
            };
            let argument = if kind == ActionKind::Type {
                Some("form input".to_owned())
            } else {
                None
            };
            actions.push((
                ActionRecord::new(kind, token(&target_text), argument),
                dest,
            ));
        }
        nodes.push(SiteNode {
            id: g as NodeId,
            observation,
            actions,
        });
    }

    let site = SiteGraph {
        seed,
        start: 0,
        nodes,
        penalty_nodes: (penalty_base..n).map(|i| i as NodeId).collect(),
    };
    site.validate()
        .map_err(|e| SimError::GenerationFailed(e.to_string()))?;

    // Tasks: up to two per section, both starting at the section entry (a
    // deep link). The first gets a goal partway along the flow, the second a
    // goal near its end, so section-mates share a route prefix. Goal
    // reachability is rechecked with a BFS; any mismatch is a generation
    // error.
    let mut tasks = Vec::with_capacity(params.tasks);
    for (s, &(base, size)) in section_bounds.iter().enumerate() {
        let start = base as NodeId;
        let dist = site.distances_from(start);
        let depth_lo = params.min_goal_depth.clamp(1, size - 1);
        let hosts_two = TASKS_PER_SECTION * s + 1 < params.tasks;
        // Goals sit at the end of the flow: section-mates share all but the
        // last hop, and step budgets stay comparable across tasks. The
        // deeper goal comes first, so its recorded routes cover the mate's
        // entire path.
        let depths = if hosts_two {
            vec![size - 1, (size - 2).max(depth_lo)]
        } else {
            vec![size - 1]
        };
        for (slot, goal_local) in depths.into_iter().enumerate() {
            let t = TASKS_PER_SECTION * s + slot;
            let goal = (base + goal_local) as NodeId;
            let optimal = dist[goal as usize];
            if optimal == u32::MAX {
                return Err(SimError::GenerationFailed(format!(
                    "goal {goal} unreachable from entry {start}"
                )));
            }
            let optimal = optimal as usize;
            tasks.push(TaskSpec {
                task_id: format!("t{t:02}"),
                directive: format!(
                    "from page p{start:03} reach page p{goal:03} in zone z{s:02}"
                ),
                start,
                goal,
                max_steps: optimal * params.max_steps_factor + params.max_steps_slack,
                optimal_steps: optimal,
            });
        }
    }

    Ok((site, tasks))
}

/// Shortest action sequence from the task start to its goal, or `None` if
/// the goal is unreachable.
pub fn optimal_script(site: &SiteGraph, task: &TaskSpec) -> Option<Vec<ActionRecord>> {
    let n = site.node_count();
    let mut prev: Vec<Option<(NodeId, usize)>> = vec![None; n];
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    dist[task.start as usize] = 0;
    queue.push_back(task.start);
    while let Some(v) = queue.pop_front() {
        if v == task.goal {
            break;
        }
        for (slot, &(_, dest)) in site.actions(v).iter().enumerate() {
            if dist[dest as usize] == u32::MAX {
                dist[dest as usize] = dist[v as usize] + 1;
                prev[dest as usize] = Some((v, slot));
                queue.push_back(dest);
            }
        }
    }
    if dist[task.goal as usize] == u32::MAX {
        return None;
    }
    let mut script = Vec::new();
    let mut cursor = task.goal;
    while cursor != task.start {
        let (parent, slot) = prev[cursor as usize].expect("path reconstructible");
        script.push(site.actions(parent)[slot].0.clone());
        cursor = parent;
    }
    script.reverse();
    Some(script)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_gives_identical_sites() {
        let params = SiteParams {
            nodes: 40,
            tasks: 5,
            ..SiteParams::default()
        };
        let a = generate_site(9, &params).unwrap();
        let b = generate_site(9, &params).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn different_seeds_differ() {
        let params = SiteParams {
            nodes: 40,
            tasks: 5,
            ..SiteParams::default()
        };
        let a = generate_site(1, &params).unwrap();
        let b = generate_site(2, &params).unwrap();
        assert_ne!(a.0, b.0);
    }

    #[test]
    fn all_tasks_verified_reachable_by_bfs_oracle() {
        let params = SiteParams {
            nodes: 20,
            branching: 2,
            tasks: 2,
            ..SiteParams::default()
        };
        let (site, tasks) = generate_site(1, &params).unwrap();
        for task in &tasks {
            // Independent forward search, not the generator's distance table.
            let mut seen = vec![false; site.node_count()];
            let mut queue = VecDeque::from([task.start]);
            seen[task.start as usize] = true;
            let mut hops = 0;
            let mut found = task.start == task.goal;
            while !queue.is_empty() && !found {
                hops += 1;
                for _ in 0..queue.len() {
                    let v = queue.pop_front().unwrap();
                    for &(_, dest) in site.actions(v) {
                        if !seen[dest as usize] {
                            seen[dest as usize] = true;
                            if dest == task.goal {
                                found = true;
                            }
                            queue.push_back(dest);
                        }
                    }
                }
                if found {
                    break;
                }
            }
            assert!(found, "task {} goal unreachable", task.task_id);
            assert_eq!(hops, task.optimal_steps, "task {}", task.task_id);
            assert!(task.optimal_steps <= task.max_steps);
        }
    }

    #[test]
    fn branching_one_is_rejected() {
        let params = SiteParams {
            branching: 1,
            ..SiteParams::default()
        };
        match generate_site(1, &params) {
            Err(SimError::InvalidParam { name, .. }) => assert_eq!(name, "branching"),
            other => panic!("expected parameter error, got {other:?}"),
        }
    }

    #[test]
    fn node_count_out_of_range_is_rejected() {
        for nodes in [9, 501] {
            let params = SiteParams {
                nodes,
                ..SiteParams::default()
            };
            assert!(matches!(
                generate_site(1, &params),
                Err(SimError::InvalidParam { name: "nodes", .. })
            ));
        }
    }

    #[test]
    fn generated_sites_validate() {
        for seed in 0..5 {
            let (site, _) = generate_site(seed, &SiteParams::default()).unwrap();
            site.validate().unwrap();
        }
    }

    #[test]
    fn penalty_nodes_are_dead_ends() {
        let (site, _) = generate_site(3, &SiteParams::default()).unwrap();
        assert!(!site.penalty_nodes.is_empty());
        for &p in &site.penalty_nodes {
            assert!(site.actions(p).is_empty());
        }
    }

    #[test]
    fn optimal_script_has_optimal_length() {
        let (site, tasks) = generate_site(5, &SiteParams::default()).unwrap();
        for task in &tasks {
            let script = optimal_script(&site, task).unwrap();
            assert_eq!(script.len(), task.optimal_steps);
        }
    }

    #[test]
    fn site_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("site.json");
        let (site, tasks) = generate_site(
            11,
            &SiteParams {
                nodes: 30,
                tasks: 4,
                ..SiteParams::default()
            },
        )
        .unwrap();
        save_site(&path, &site, &tasks).unwrap();
        let (site2, tasks2) = load_site(&path).unwrap();
        assert_eq!(site, site2);
        assert_eq!(tasks, tasks2);
    }
}
