//! Task x repetition experiment grids with online memory accumulation.
//!
//! Grids run in task-major, rep-minor order. When the arm uses memory,
//! every completed episode is ingested into the store before the next one
//! runs, so later episodes retrieve from everything that came before. That
//! order is part of the contract: memory-enabled grids are sequential.

use serde::{Deserialize, Serialize};

use super::{AblationCurve, EvalError, ResultsMatrix};
use crate::embed::{CachingEmbedder, Embedder};
use crate::hashing::mix64;
use crate::sim::{
    optimal_script, run_episode, MemoryBinding, Policy, PolicyParams, SiteGraph, TaskSpec,
};
use crate::store::MemoryStore;

/// Which policy a grid runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArmSpec {
    /// Replay each task's precomputed shortest path. Test oracle.
    ScriptedOptimal,
    Baseline {
        params: PolicyParams,
    },
    Memory {
        params: PolicyParams,
        k: usize,
        tau: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub reps: usize,
    pub base_seed: u64,
    pub arm: ArmSpec,
}

pub struct GridOutcome {
    pub matrix: ResultsMatrix,
    /// Final store state (empty unless the arm used memory).
    pub store: MemoryStore,
}

/// Episode seed derived from the grid seed and the cell coordinates, so
/// results never depend on execution interleaving.
pub fn episode_seed(base_seed: u64, task_index: usize, rep: usize) -> u64 {
    mix64(base_seed ^ mix64(((task_index as u64) << 32) | rep as u64))
}

fn validate_arm(arm: &ArmSpec) -> Result<(), EvalError> {
    let params = match arm {
        ArmSpec::ScriptedOptimal => return Ok(()),
        ArmSpec::Baseline { params } => params,
        ArmSpec::Memory { params, k, tau } => {
            if *k < 1 {
                return Err(EvalError::InvalidConfig(
                    "memory arm requires k >= 1".into(),
                ));
            }
            if !(0.0..=1.0).contains(tau) {
                return Err(EvalError::InvalidConfig(format!(
                    "tau must lie in [0, 1], got {tau}"
                )));
            }
            params
        }
    };
    params.validate().map_err(EvalError::InvalidConfig)
}

/// Run every (task, rep) episode and collect the results matrix.
pub fn run_grid(
    site: &SiteGraph,
    tasks: &[TaskSpec],
    cfg: &GridConfig,
    embedder: &dyn Embedder<f64>,
) -> Result<GridOutcome, EvalError> {
    if cfg.reps == 0 {
        return Err(EvalError::InvalidConfig("reps must be at least 1".into()));
    }
    if tasks.is_empty() {
        return Err(EvalError::InvalidConfig("task list is empty".into()));
    }
    validate_arm(&cfg.arm)?;

    let caching = CachingEmbedder::new(embedder);
    let mut store = MemoryStore::in_memory();
    let mut success = vec![vec![false; cfg.reps]; tasks.len()];
    let mut steps = vec![vec![0usize; cfg.reps]; tasks.len()];

    let scripts: Vec<Vec<crate::state::ActionRecord>> = match cfg.arm {
        ArmSpec::ScriptedOptimal => tasks
            .iter()
            .map(|task| {
                optimal_script(site, task).ok_or_else(|| {
                    EvalError::InvalidConfig(format!(
                        "task {} has no path to its goal",
                        task.task_id
                    ))
                })
            })
            .collect::<Result<_, _>>()?,
        _ => Vec::new(),
    };

    let mut episode_ordinal: i64 = 0;
    for (ti, task) in tasks.iter().enumerate() {
        for rep in 0..cfg.reps {
            let seed = episode_seed(cfg.base_seed, ti, rep);
            let episode = {
                let policy = match &cfg.arm {
                    ArmSpec::ScriptedOptimal => Policy::Scripted(&scripts[ti]),
                    ArmSpec::Baseline { params } => Policy::Baseline(*params),
                    ArmSpec::Memory { params, k, tau } => Policy::Memory {
                        params: *params,
                        binding: MemoryBinding {
                            store: &store,
                            k: *k,
                            tau: *tau,
                            embedder: &caching,
                        },
                    },
                };
                run_episode(site, task, &policy, seed)?
            };
            success[ti][rep] = episode.success;
            steps[ti][rep] = episode.steps_taken;
            if matches!(cfg.arm, ArmSpec::Memory { .. }) && !episode.trajectory.steps.is_empty() {
                store.ingest_trajectory(&episode.trajectory, episode_ordinal)?;
            }
            episode_ordinal += 1;
        }
    }

    let task_ids = tasks.iter().map(|t| t.task_id.clone()).collect();
    Ok(GridOutcome {
        matrix: ResultsMatrix::from_parts(task_ids, cfg.reps, success, steps)?,
        store,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblateConfig {
    pub reps: usize,
    /// One grid per seed per k; seeds are shared across k values.
    pub replicate_seeds: Vec<u64>,
    pub params: PolicyParams,
    pub tau: f64,
}

/// Sweep retrieval breadth. `k = 0` means retrieval disabled (the baseline
/// arm); `k_values` must be strictly ascending.
pub fn ablate_k(
    site: &SiteGraph,
    tasks: &[TaskSpec],
    cfg: &AblateConfig,
    k_values: &[usize],
    embedder: &dyn Embedder<f64>,
) -> Result<AblationCurve, EvalError> {
    if k_values.is_empty() {
        return Err(EvalError::InvalidKValues("list is empty".into()));
    }
    for pair in k_values.windows(2) {
        if pair[1] == pair[0] {
            return Err(EvalError::InvalidKValues(format!(
                "duplicate k value {}",
                pair[0]
            )));
        }
        if pair[1] < pair[0] {
            return Err(EvalError::InvalidKValues(
                "values must be ascending".into(),
            ));
        }
    }
    if cfg.replicate_seeds.is_empty() {
        return Err(EvalError::InvalidConfig(
            "at least one replicate seed is required".into(),
        ));
    }

    let mut replicate_accuracy = Vec::with_capacity(k_values.len());
    let mut means = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let mut per_seed = Vec::with_capacity(cfg.replicate_seeds.len());
        for &seed in &cfg.replicate_seeds {
            let arm = if k == 0 {
                ArmSpec::Baseline { params: cfg.params }
            } else {
                ArmSpec::Memory {
                    params: cfg.params,
                    k,
                    tau: cfg.tau,
                }
            };
            let grid = GridConfig {
                reps: cfg.reps,
                base_seed: seed,
                arm,
            };
            per_seed.push(run_grid(site, tasks, &grid, embedder)?.matrix.accuracy()?);
        }
        means.push(per_seed.iter().sum::<f64>() / per_seed.len() as f64);
        replicate_accuracy.push(per_seed);
    }

    Ok(AblationCurve {
        k_values: k_values.to_vec(),
        accuracy: means,
        seeds: cfg.replicate_seeds.len(),
        replicate_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashEmbedder;
    use crate::sim::{generate_site, SiteParams};

    fn fixture() -> (SiteGraph, Vec<TaskSpec>) {
        generate_site(
            7,
            &SiteParams {
                nodes: 30,
                tasks: 4,
                ..SiteParams::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn scripted_grid_is_all_success_at_optimal_steps() {
        let (site, tasks) = fixture();
        let cfg = GridConfig {
            reps: 1,
            base_seed: 0,
            arm: ArmSpec::ScriptedOptimal,
        };
        let embedder = HashEmbedder::<f64>::default();
        let out = run_grid(&site, &tasks, &cfg, &embedder).unwrap();
        assert_eq!(out.matrix.accuracy().unwrap(), 1.0);
        for (ti, task) in tasks.iter().enumerate() {
            assert_eq!(out.matrix.steps(ti, 0), task.optimal_steps);
        }
    }

    #[test]
    fn grids_are_deterministic() {
        let (site, tasks) = fixture();
        let cfg = GridConfig {
            reps: 3,
            base_seed: 5,
            arm: ArmSpec::Memory {
                params: PolicyParams::default(),
                k: 4,
                tau: 0.3,
            },
        };
        let embedder = HashEmbedder::<f64>::default();
        let a = run_grid(&site, &tasks, &cfg, &embedder).unwrap();
        let b = run_grid(&site, &tasks, &cfg, &embedder).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.store.entries(), b.store.entries());
    }

    #[test]
    fn memory_grid_accumulates_entries_online() {
        let (site, tasks) = fixture();
        let cfg = GridConfig {
            reps: 2,
            base_seed: 1,
            arm: ArmSpec::Memory {
                params: PolicyParams::default(),
                k: 8,
                tau: 0.3,
            },
        };
        let embedder = HashEmbedder::<f64>::default();
        let out = run_grid(&site, &tasks, &cfg, &embedder).unwrap();
        assert!(!out.store.is_empty());
    }

    #[test]
    fn ablation_k_zero_is_the_baseline_arm() {
        let (site, tasks) = fixture();
        let params = PolicyParams::default();
        let cfg = AblateConfig {
            reps: 2,
            replicate_seeds: vec![3, 4],
            params,
            tau: 0.3,
        };
        let embedder = HashEmbedder::<f64>::default();
        let curve = ablate_k(&site, &tasks, &cfg, &[0], &embedder).unwrap();

        let mut accs = Vec::new();
        for seed in [3u64, 4] {
            let grid = GridConfig {
                reps: 2,
                base_seed: seed,
                arm: ArmSpec::Baseline { params },
            };
            accs.push(run_grid(&site, &tasks, &grid, &embedder).unwrap().matrix.accuracy().unwrap());
        }
        assert_eq!(curve.accuracy[0], accs.iter().sum::<f64>() / 2.0);
        assert_eq!(curve.replicate_accuracy[0], accs);
    }

    #[test]
    fn ablation_rejects_bad_k_lists() {
        let (site, tasks) = fixture();
        let cfg = AblateConfig {
            reps: 1,
            replicate_seeds: vec![1],
            params: PolicyParams::default(),
            tau: 0.3,
        };
        let embedder = HashEmbedder::<f64>::default();
        assert!(matches!(
            ablate_k(&site, &tasks, &cfg, &[0, 2, 2], &embedder),
            Err(EvalError::InvalidKValues(_))
        ));
        assert!(matches!(
            ablate_k(&site, &tasks, &cfg, &[4, 2], &embedder),
            Err(EvalError::InvalidKValues(_))
        ));
        assert!(matches!(
            ablate_k(&site, &tasks, &cfg, &[], &embedder),
            Err(EvalError::InvalidKValues(_))
        ));
    }

    #[test]
    fn invalid_grid_configs_are_rejected() {
        let (site, tasks) = fixture();
        let embedder = HashEmbedder::<f64>::default();
        let bad_reps = GridConfig {
            reps: 0,
            base_seed: 0,
            arm: ArmSpec::ScriptedOptimal,
        };
        assert!(run_grid(&site, &tasks, &bad_reps, &embedder).is_err());
        let bad_tau = GridConfig {
            reps: 1,
            base_seed: 0,
            arm: ArmSpec::Memory {
                params: PolicyParams::default(),
                k: 1,
                tau: 1.5,
            },
        };
        assert!(run_grid(&site, &tasks, &bad_tau, &embedder).is_err());
    }
}
