//! Grouped cross-validation folds: every participant's samples stay inside
//! a single fold.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A k-fold assignment of participant ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Each fold's participants, sorted within the fold.
    pub folds: Vec<Vec<String>>,
    pub seed: u64,
}

impl SplitPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Participants outside fold `test_fold`: the outer-training set.
    pub fn train_participants(&self, test_fold: usize) -> Vec<String> {
        let mut out: Vec<String> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != test_fold)
            .flat_map(|(_, fold)| fold.iter().cloned())
            .collect();
        out.sort();
        out
    }

    /// Check disjointness, exhaustiveness over `participants`, and ±1 size
    /// balance.
    pub fn validate(&self, participants: &[String]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for fold in &self.folds {
            for pid in fold {
                if !seen.insert(pid.as_str()) {
                    return Err(Error::Validation(format!(
                        "participant `{pid}` assigned to two folds"
                    )));
                }
            }
        }
        let expected: BTreeSet<&str> = participants.iter().map(String::as_str).collect();
        if seen != expected {
            return Err(Error::Validation(format!(
                "folds cover {} participants, expected {}",
                seen.len(),
                expected.len()
            )));
        }
        let sizes: Vec<usize> = self.folds.iter().map(Vec::len).collect();
        let (min, max) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if max - min > 1 {
            return Err(Error::Validation(format!(
                "fold sizes unbalanced: {sizes:?}"
            )));
        }
        Ok(())
    }
}

/// Shuffle participants with the seeded generator and deal them round-robin
/// into `k` folds. Input order does not matter: ids are sorted first.
pub fn make_subject_folds(participants: &[String], k: usize, seed: u64) -> Result<SplitPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2 folds, got {k}")));
    }
    if participants.len() < k {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} participants into {k} folds",
            participants.len()
        )));
    }
    let mut ids: Vec<String> = participants.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != participants.len() {
        return Err(Error::InvalidArgument(
            "duplicate participant ids in fold input".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let mut folds: Vec<Vec<String>> = vec![Vec::new(); k];
    for (i, pid) in ids.into_iter().enumerate() {
        folds[i % k].push(pid);
    }
    for fold in &mut folds {
        fold.sort();
    }
    let plan = SplitPlan { folds, seed };
    debug_assert!(plan.validate(participants).is_ok());
    Ok(plan)
}
