//! Experiment grids and the four metric families.
//!
//! A [`ResultsMatrix`] holds task x repetition outcomes. Metrics:
//!
//! - **accuracy**: mean success over all cells.
//! - **best_of_n**: fraction of tasks with at least one successful rep.
//! - **reliability**: mean per-task success rate over tasks having at least
//!   one success.
//! - **avg_steps**: average steps over tasks having at least one success;
//!   failed reps of qualifying tasks count with the steps they actually took.
//!
//! Reliability and avg_steps are undefined when no task qualifies and return
//! an explicit `None`, never 0.

mod grid;
mod report;

pub use grid::{ablate_k, episode_seed, run_grid, AblateConfig, ArmSpec, GridConfig, GridOutcome};
pub use report::{
    emit_report, read_ablation_csv, read_episodes_csv, write_ablation_csv, write_episodes_csv,
    write_summary_csv, write_summary_markdown,
};

use thiserror::Error;

use crate::retrieval::RetrievalError;
use crate::sim::SimError;
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("results matrix must be non-empty")]
    EmptyMatrix,
    #[error("results matrix is not rectangular: {0}")]
    ShapeMismatch(String),
    #[error("invalid k values: {0}")]
    InvalidKValues(String),
    #[error("invalid grid config: {0}")]
    InvalidConfig(String),
    #[error("malformed report file {path}: {message}")]
    MalformedReport { path: String, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
}

/// How `avg_steps` pools step counts over qualifying tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepAggregation {
    /// Per-task mean over all reps, then mean across tasks.
    #[default]
    PerTaskMean,
    /// Pool every rep of every qualifying task. Coincides with
    /// `PerTaskMean` on rectangular grids; kept for comparison.
    Pooled,
    /// Per-task mean over successful reps only, then mean across tasks.
    SuccessfulOnly,
}

/// Success flags and step counts for a task x repetition grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsMatrix {
    task_ids: Vec<String>,
    reps: usize,
    success: Vec<Vec<bool>>,
    steps: Vec<Vec<usize>>,
}

impl ResultsMatrix {
    pub fn from_parts(
        task_ids: Vec<String>,
        reps: usize,
        success: Vec<Vec<bool>>,
        steps: Vec<Vec<usize>>,
    ) -> Result<Self, EvalError> {
        if success.len() != task_ids.len() || steps.len() != task_ids.len() {
            return Err(EvalError::ShapeMismatch(format!(
                "{} tasks but {} success rows and {} step rows",
                task_ids.len(),
                success.len(),
                steps.len()
            )));
        }
        for (t, (s, st)) in success.iter().zip(&steps).enumerate() {
            if s.len() != reps || st.len() != reps {
                return Err(EvalError::ShapeMismatch(format!(
                    "task {t} has {} success cells and {} step cells, expected {reps}",
                    s.len(),
                    st.len()
                )));
            }
        }
        Ok(Self {
            task_ids,
            reps,
            success,
            steps,
        })
    }

    pub fn task_ids(&self) -> &[String] {
        &self.task_ids
    }

    pub fn n_tasks(&self) -> usize {
        self.task_ids.len()
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn success(&self, task: usize, rep: usize) -> bool {
        self.success[task][rep]
    }

    pub fn steps(&self, task: usize, rep: usize) -> usize {
        self.steps[task][rep]
    }

    fn ensure_non_empty(&self) -> Result<(), EvalError> {
        if self.task_ids.is_empty() || self.reps == 0 {
            return Err(EvalError::EmptyMatrix);
        }
        Ok(())
    }

    fn qualifying_tasks(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_tasks()).filter(|&t| self.success[t].iter().any(|&s| s))
    }

    /// Mean success over all task-rep cells.
    pub fn accuracy(&self) -> Result<f64, EvalError> {
        self.ensure_non_empty()?;
        let hits: usize = self
            .success
            .iter()
            .map(|row| row.iter().filter(|&&s| s).count())
            .sum();
        Ok(hits as f64 / (self.n_tasks() * self.reps) as f64)
    }

    /// Fraction of tasks with at least one successful rep.
    pub fn best_of_n(&self) -> Result<f64, EvalError> {
        self.ensure_non_empty()?;
        Ok(self.qualifying_tasks().count() as f64 / self.n_tasks() as f64)
    }

    /// Mean per-task success rate over tasks with at least one success.
    /// `None` when no task has any success.
    pub fn reliability(&self) -> Result<Option<f64>, EvalError> {
        self.ensure_non_empty()?;
        let rates: Vec<f64> = self
            .qualifying_tasks()
            .map(|t| {
                let hits = self.success[t].iter().filter(|&&s| s).count();
                hits as f64 / self.reps as f64
            })
            .collect();
        Ok(mean(&rates))
    }

    /// Average steps over tasks with at least one success (two-level mean).
    pub fn avg_steps(&self) -> Result<Option<f64>, EvalError> {
        self.avg_steps_with(StepAggregation::PerTaskMean)
    }

    pub fn avg_steps_with(&self, mode: StepAggregation) -> Result<Option<f64>, EvalError> {
        self.ensure_non_empty()?;
        match mode {
            StepAggregation::PerTaskMean => {
                let task_means: Vec<f64> = self
                    .qualifying_tasks()
                    .map(|t| {
                        self.steps[t].iter().sum::<usize>() as f64 / self.reps as f64
                    })
                    .collect();
                Ok(mean(&task_means))
            }
            StepAggregation::Pooled => {
                let mut total = 0usize;
                let mut cells = 0usize;
                for t in self.qualifying_tasks() {
                    total += self.steps[t].iter().sum::<usize>();
                    cells += self.reps;
                }
                if cells == 0 {
                    Ok(None)
                } else {
                    Ok(Some(total as f64 / cells as f64))
                }
            }
            StepAggregation::SuccessfulOnly => {
                let task_means: Vec<f64> = self
                    .qualifying_tasks()
                    .map(|t| {
                        let (total, hits) = self.success[t]
                            .iter()
                            .zip(&self.steps[t])
                            .filter(|(&s, _)| s)
                            .fold((0usize, 0usize), |(sum, n), (_, &st)| (sum + st, n + 1));
                        total as f64 / hits as f64
                    })
                    .collect();
                Ok(mean(&task_means))
            }
        }
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Per-k mean accuracy over shared replicate seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationCurve {
    pub k_values: Vec<usize>,
    /// Mean accuracy per k, aligned with `k_values`.
    pub accuracy: Vec<f64>,
    /// Replication count behind each mean.
    pub seeds: usize,
    /// Accuracy per k per replicate, `[k index][replicate index]`.
    pub replicate_accuracy: Vec<Vec<f64>>,
}
