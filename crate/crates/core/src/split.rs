//! Grouped train/validation/test splitting.
//!
//! Groups (image frames) are shuffled with a seeded stream and handed out in
//! that order: the first `round(r_train·G)` go to train, the next
//! `round(r_val·G)` to validation, the rest to test. Every split gets at least
//! one group.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::derived_rng;
use crate::types::{DatasetSplit, TaskRecord};

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

/// Number of groups each split receives.
pub fn group_quotas(groups: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidArgument("split ratios must be positive"));
    }
    if math::abs(ratios.iter().sum::<f64>() - 1.0) > 1e-9 {
        return Err(Error::InvalidArgument("split ratios must sum to 1"));
    }
    if groups < 3 {
        return Err(Error::NotEnoughGroups { groups, splits: 3 });
    }
    let g = groups as f64;
    let mut train = (math::round(ratios[0] * g) as usize).max(1);
    let mut val = (math::round(ratios[1] * g) as usize).max(1);
    while train + val >= groups {
        if train >= val && train > 1 {
            train -= 1;
        } else {
            val -= 1;
        }
    }
    Ok([train, val, groups - train - val])
}

/// Splits tasks by `group_key` so every group lands in exactly one split.
pub fn split_dataset<F>(
    tasks: &[TaskRecord],
    ratios: [f64; 3],
    group_key: F,
    seed: u64,
) -> Result<DatasetSplit>
where
    F: Fn(&TaskRecord) -> &str,
{
    let mut groups: Vec<&str> = tasks
        .iter()
        .map(&group_key)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let [train_n, val_n, _] = group_quotas(groups.len(), ratios)?;
    groups.shuffle(&mut derived_rng(seed, "split", 0));

    let assignment: alloc::collections::BTreeMap<&str, usize> = groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let split = if i < train_n {
                0
            } else if i < train_n + val_n {
                1
            } else {
                2
            };
            (*g, split)
        })
        .collect();

    let mut out = DatasetSplit::default();
    for task in tasks {
        let id: String = task.task_id.clone();
        match assignment[group_key(task)] {
            0 => out.train.push(id),
            1 => out.val.push(id),
            _ => out.test.push(id),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn grouped_tasks(groups: usize, per_group: usize) -> Vec<TaskRecord> {
        (0..groups * per_group)
            .map(|i| {
                let mut t = TaskRecord::new(format!("t{i}"));
                t.group = Some(format!("frame{}", i / per_group));
                t
            })
            .collect()
    }

    #[test]
    fn ten_groups_split_eight_one_one() {
        let tasks = grouped_tasks(10, 3);
        let split = split_dataset(&tasks, DEFAULT_RATIOS, TaskRecord::group_key, 7).unwrap();
        assert_eq!(
            (split.train.len(), split.val.len(), split.test.len()),
            (24, 3, 3)
        );
    }

    #[test]
    fn single_group_is_rejected() {
        let tasks = grouped_tasks(1, 5);
        assert_eq!(
            split_dataset(&tasks, DEFAULT_RATIOS, TaskRecord::group_key, 7),
            Err(Error::NotEnoughGroups { groups: 1, splits: 3 })
        );
    }

    #[test]
    fn groups_never_straddle_splits() {
        let tasks = grouped_tasks(40, 4);
        let split = split_dataset(&tasks, DEFAULT_RATIOS, TaskRecord::group_key, 3).unwrap();
        let frame = |id: &String| tasks.iter().find(|t| &t.task_id == id).unwrap().group.clone();
        let train: BTreeSet<_> = split.train.iter().map(frame).collect();
        let val: BTreeSet<_> = split.val.iter().map(frame).collect();
        let test: BTreeSet<_> = split.test.iter().map(frame).collect();
        assert!(train.is_disjoint(&val) && train.is_disjoint(&test) && val.is_disjoint(&test));
        assert_eq!(split.train.len() + split.val.len() + split.test.len(), tasks.len());
    }

    #[test]
    fn ecp_scale_quotas_track_ratios() {
        // 4029 + 500 + 548 frames in the published split.
        let groups = 4029 + 500 + 548;
        let quotas = group_quotas(groups, DEFAULT_RATIOS).unwrap();
        for (q, r) in quotas.iter().zip(DEFAULT_RATIOS) {
            assert!((*q as f64 - r * groups as f64).abs() <= 2.0);
        }
        assert_eq!(quotas.iter().sum::<usize>(), groups);
    }

    #[test]
    fn split_is_reproducible_and_seed_sensitive() {
        let tasks = grouped_tasks(50, 2);
        let a = split_dataset(&tasks, DEFAULT_RATIOS, TaskRecord::group_key, 1).unwrap();
        let b = split_dataset(&tasks, DEFAULT_RATIOS, TaskRecord::group_key, 1).unwrap();
        let c = split_dataset(&tasks, DEFAULT_RATIOS, TaskRecord::group_key, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn bad_ratios_are_rejected() {
        assert!(group_quotas(10, [0.5, 0.5, 0.1]).is_err());
        assert!(group_quotas(10, [0.9, 0.1, 0.0]).is_err());
    }
}
