use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng;

/// Which repetitions train and which test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_reps: Vec<u32>,
    pub test_reps: Vec<u32>,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            train_reps: alloc::vec![1, 3, 4, 6],
            test_reps: alloc::vec![2, 5],
        }
    }
}

impl SplitPlan {
    pub fn new(train_reps: Vec<u32>, test_reps: Vec<u32>) -> Result<Self> {
        let plan = SplitPlan { train_reps, test_reps };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_reps.is_empty() || self.test_reps.is_empty() {
            return Err(Error::InvalidParameter("split needs nonempty train and test repetition sets".into()));
        }
        if self.train_reps.iter().any(|r| self.test_reps.contains(r)) {
            return Err(Error::InvalidParameter("train and test repetitions overlap".into()));
        }
        Ok(())
    }
}

/// Routes rows by repetition; rows in neither set are dropped.
pub fn split_by_repetition(fm: &FeatureMatrix, plan: &SplitPlan) -> Result<(FeatureMatrix, FeatureMatrix)> {
    plan.validate()?;
    let train = fm.filter(|_, r| plan.train_reps.contains(&r));
    let test = fm.filter(|_, r| plan.test_reps.contains(&r));
    if train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(Error::EmptySplit("test"));
    }
    Ok((train, test))
}

/// All nonempty subsets ordered by size, then lexicographically.
pub fn enumerate_rep_subsets(train_reps: &[u32]) -> Result<Vec<Vec<u32>>> {
    let reps: Vec<u32> = train_reps.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if reps.is_empty() {
        return Err(Error::EmptyInput("repetition subset enumeration"));
    }
    if reps.len() > 8 {
        return Err(Error::InvalidParameter(alloc::format!(
            "at most 8 training repetitions supported, got {}",
            reps.len()
        )));
    }
    let mut subsets: Vec<Vec<u32>> = (1u32..(1 << reps.len()))
        .map(|mask| {
            reps.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &r)| r)
                .collect()
        })
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(subsets)
}

/// Row-index folds (each entry is a held-out set) over a seeded shuffle,
/// as equal as possible.
pub fn kfold_shuffled(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidParameter("at least 2 folds required".into()));
    }
    if n < folds {
        return Err(Error::TooFewSamples {
            context: "k-fold cross-validation",
            needed: folds,
            found: n,
        });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::rng_from(seed));
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let size = n / folds + usize::from(f < n % folds);
        let mut fold = idx[start..start + size].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += size;
    }
    Ok(out)
}

/// One fold per distinct repetition; with a single repetition, `fallback`
/// shuffled folds over the rows.
pub fn kfold_by_repetition(fm: &FeatureMatrix, fallback: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let reps = fm.repetition_set();
    match reps.len() {
        0 => Err(Error::EmptyInput("repetition folds")),
        1 => kfold_shuffled(fm.len(), fallback, seed),
        _ => Ok(reps
            .iter()
            .map(|&r| (0..fm.len()).filter(|&i| fm.repetitions[i] == r).collect())
            .collect()),
    }
}

/// Fails if any row of `fm` comes from a held-out repetition.
pub fn check_no_leakage(fm: &FeatureMatrix, held_out: &[u32], stage: &'static str) -> Result<()> {
    match fm.repetitions.iter().find(|r| held_out.contains(r)) {
        Some(&repetition) => Err(Error::Leakage { stage, repetition }),
        None => Ok(()),
    }
}
