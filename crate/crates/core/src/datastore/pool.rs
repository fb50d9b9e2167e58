use std::collections::BTreeSet;

use super::dataset::EmbeddingDataset;
use crate::error::{CpealError, Result};

/// Partition of the train split into the labeled pool and the unlabeled pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    labeled: BTreeSet<usize>,
    unlabeled: BTreeSet<usize>,
    /// Number of completed acquisition cycles. Advanced by the caller.
    pub cycle: usize,
}

impl PoolState {
    /// Every train-tagged row starts unlabeled.
    pub fn new(ds: &EmbeddingDataset) -> Self {
        PoolState {
            labeled: BTreeSet::new(),
            unlabeled: ds.train_indices().into_iter().collect(),
            cycle: 0,
        }
    }

    pub fn from_parts(labeled: impl IntoIterator<Item = usize>, unlabeled: impl IntoIterator<Item = usize>) -> Result<Self> {
        let labeled: BTreeSet<usize> = labeled.into_iter().collect();
        let unlabeled: BTreeSet<usize> = unlabeled.into_iter().collect();
        if let Some(i) = labeled.intersection(&unlabeled).next() {
            return Err(CpealError::validation(format!(
                "index {i} is both labeled and unlabeled"
            )));
        }
        Ok(PoolState {
            labeled,
            unlabeled,
            cycle: 0,
        })
    }

    pub fn labeled(&self) -> Vec<usize> {
        self.labeled.iter().copied().collect()
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        self.unlabeled.iter().copied().collect()
    }

    pub fn num_labeled(&self) -> usize {
        self.labeled.len()
    }

    pub fn num_unlabeled(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        self.labeled.contains(&i)
    }

    /// Moves `indices` from the unlabeled to the labeled pool. The whole call
    /// fails, leaving the pool untouched, if any index is unknown or repeated.
    pub fn reveal(&mut self, indices: &[usize]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &i in indices {
            if !seen.insert(i) {
                return Err(CpealError::selection(format!("index {i} revealed twice")));
            }
            if !self.unlabeled.contains(&i) {
                return Err(CpealError::selection(format!(
                    "index {i} is not in the unlabeled pool"
                )));
            }
        }
        for i in seen {
            self.unlabeled.remove(&i);
            self.labeled.insert(i);
        }
        Ok(())
    }

    /// Checks that the pool partitions exactly the train split of `ds`.
    pub fn check_against(&self, ds: &EmbeddingDataset) -> Result<()> {
        let train: BTreeSet<usize> = ds.train_indices().into_iter().collect();
        if let Some(i) = self.labeled.iter().find(|i| !train.contains(i)) {
            return Err(CpealError::validation(format!(
                "labeled index {i} is not a train row"
            )));
        }
        let union: BTreeSet<usize> = self.labeled.union(&self.unlabeled).copied().collect();
        if union != train || self.labeled.intersection(&self.unlabeled).next().is_some() {
            return Err(CpealError::validation(
                "pool does not partition the train split",
            ));
        }
        Ok(())
    }
}

/// Functional form of [`PoolState::reveal`].
pub fn reveal_labels(pool: &PoolState, indices: &[usize]) -> Result<PoolState> {
    let mut next = pool.clone();
    next.reveal(indices)?;
    Ok(next)
}

impl PoolState {
    pub fn reveal_labels(&self, indices: &[usize]) -> Result<PoolState> {
        reveal_labels(self, indices)
    }
}
