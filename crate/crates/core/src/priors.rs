//! Learned priors for repeated annotation.
//!
//! The head's zero-response prediction `α̂|₀` is blended with the uniform
//! prior and then updated with responses one at a time. Replaying the
//! responses of a task in random orders shows how quickly each prior reaches
//! the label that all responses together support.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::bayes::{posterior_mode, uniform_prior_of_len};
use crate::error::{Error, Result};
use crate::math::{map_indices, quantile_sorted};
use crate::metrics::soft_distance;
use crate::rng::task_rng;
use crate::types::{DirichletParams, SoftLabel, TaskRecord};

pub const DEFAULT_BLEND: f64 = 1.0 / 3.0;
pub const DEFAULT_PERMUTATIONS: usize = 16;

/// `(1 - blend)·1 + blend·α̂`.
pub fn blend_prior(predicted: &DirichletParams, blend: f64) -> Result<DirichletParams> {
    if !(0.0..=1.0).contains(&blend) {
        return Err(Error::InvalidArgument("blend must lie in [0, 1]"));
    }
    DirichletParams::new(
        predicted
            .alpha()
            .iter()
            .map(|a| (1.0 - blend) + blend * a)
            .collect(),
    )
}

/// Soft-label distance of the posterior mode to `reference` after each
/// prefix of `answers`, starting with the empty prefix.
pub fn replay(prior: &DirichletParams, answers: &[usize], reference: &SoftLabel) -> Result<Vec<f64>> {
    if prior.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: prior.len(),
            actual: reference.len(),
        });
    }
    let mut alpha = prior.alpha().to_vec();
    let mut out = Vec::with_capacity(answers.len() + 1);
    let distance = |alpha: &[f64]| {
        let params = DirichletParams::new(alpha.to_vec()).expect("prior plus counts stays positive");
        soft_distance(&posterior_mode(&params), reference)
    };
    out.push(distance(&alpha));
    for &answer in answers {
        if answer >= alpha.len() {
            return Err(Error::InvalidAnswer {
                task_id: alloc::string::String::new(),
                position: out.len() - 1,
                answer,
                categories: alpha.len(),
            });
        }
        alpha[answer] += 1.0;
        out.push(distance(&alpha));
    }
    Ok(out)
}

/// Mean replay distance after each of steps `1..=N` over `permutations`
/// random orders of the task's first `N ≤ max_repeats` responses. The
/// reference is the empirical frequency of those responses.
pub fn repeats_run(
    task: &TaskRecord,
    prior: &DirichletParams,
    max_repeats: usize,
    permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if permutations == 0 {
        return Err(Error::InvalidArgument("at least one permutation is required"));
    }
    let mut answers: Vec<usize> = task.answers().take(max_repeats).collect();
    if answers.is_empty() {
        return Err(Error::EmptyResponses(task.task_id.clone()));
    }
    let mut counts = alloc::vec![0.0; prior.len()];
    for &a in &answers {
        if a >= counts.len() {
            return Err(Error::InvalidAnswer {
                task_id: task.task_id.clone(),
                position: 0,
                answer: a,
                categories: counts.len(),
            });
        }
        counts[a] += 1.0;
    }
    let reference = SoftLabel::from_weights(&counts)?;
    // Same stream for every prior, so variants see identical orders.
    let mut rng = task_rng(seed, &task.task_id);
    let mut mean = alloc::vec![0.0; answers.len()];
    for _ in 0..permutations {
        answers.shuffle(&mut rng);
        for (m, d) in mean.iter_mut().zip(replay(prior, &answers, &reference)?.into_iter().skip(1)) {
            *m += d;
        }
    }
    for m in &mut mean {
        *m /= permutations as f64;
    }
    Ok(mean)
}

/// Per-step summary across tasks of task-level mean distances.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepSummary {
    /// Number of responses observed, starting at 1.
    pub step: usize,
    pub n_tasks: usize,
    pub q025: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RepeatsSummary {
    pub uniform: Vec<StepSummary>,
    /// Present when informed priors were supplied.
    pub informed: Option<Vec<StepSummary>>,
}

fn summarize(runs: &[Vec<f64>]) -> Vec<StepSummary> {
    let steps = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..steps)
        .map(|step| {
            let mut values: Vec<f64> = runs.iter().filter_map(|r| r.get(step).copied()).collect();
            values.sort_by(f64::total_cmp);
            StepSummary {
                step: step + 1,
                n_tasks: values.len(),
                q025: quantile_sorted(&values, 0.025),
                q25: quantile_sorted(&values, 0.25),
                median: quantile_sorted(&values, 0.5),
                q75: quantile_sorted(&values, 0.75),
                q975: quantile_sorted(&values, 0.975),
            }
        })
        .collect()
}

/// Repeats experiment under the uniform prior and, if given, a per-task
/// informed prior aligned with `tasks`.
pub fn repeats_summary(
    tasks: &[TaskRecord],
    categories: usize,
    informed: Option<&[DirichletParams]>,
    max_repeats: usize,
    permutations: usize,
    seed: u64,
) -> Result<RepeatsSummary> {
    if tasks.is_empty() {
        return Err(Error::EmptyInput("tasks"));
    }
    if let Some(priors) = informed {
        if priors.len() != tasks.len() {
            return Err(Error::DimensionMismatch {
                expected: tasks.len(),
                actual: priors.len(),
            });
        }
    }
    let uniform = uniform_prior_of_len(categories);
    let run_all = |prior_of: &(dyn Fn(usize) -> DirichletParams + Sync)| -> Result<Vec<Vec<f64>>> {
        map_indices(tasks.len(), |i| {
            repeats_run(&tasks[i], &prior_of(i), max_repeats, permutations, seed)
        })
        .into_iter()
        .collect()
    };
    let uniform_runs = run_all(&|_| uniform.clone())?;
    let informed_runs = match informed {
        Some(priors) => Some(run_all(&|i| priors[i].clone())?),
        None => None,
    };
    Ok(RepeatsSummary {
        uniform: summarize(&uniform_runs),
        informed: informed_runs.as_deref().map(summarize),
    })
}
