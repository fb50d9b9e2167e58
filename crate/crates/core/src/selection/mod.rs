//! Acquisition strategies.
//!
//! Uncertainty strategies (entropy, least-confidence, margin and calibrated
//! entropy) are a single pass over the pool followed by a class-balanced
//! top-B on predicted classes. Coreset (k-center greedy) and BADGE (k-means++
//! seeding over gradient embeddings) pick diverse sets directly and are not
//! class-balanced.

mod badge;
mod coreset;
mod uncertainty;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use badge::{gradient_embeddings, select_badge};
pub use coreset::select_coreset;
pub use uncertainty::{score_uncertainty, select_class_balanced, ScoredPool};

use crate::datastore::{EmbeddingDataset, PoolState};
use crate::error::{CpealError, Result};
use crate::heads::Head;
use crate::rng::{mix_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyId {
    Random,
    Entropy,
    Softmax,
    Margin,
    Coreset,
    Badge,
    /// Entropy scoring on a head trained with the calibration loss.
    Cpeal,
}

/// Selection cost as a function of the unlabeled pool size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostClass {
    Linear,
    Quadratic,
}

impl StrategyId {
    pub const ALL: [StrategyId; 7] = [
        StrategyId::Random,
        StrategyId::Entropy,
        StrategyId::Softmax,
        StrategyId::Margin,
        StrategyId::Coreset,
        StrategyId::Badge,
        StrategyId::Cpeal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyId::Random => "random",
            StrategyId::Entropy => "entropy",
            StrategyId::Softmax => "softmax",
            StrategyId::Margin => "margin",
            StrategyId::Coreset => "coreset",
            StrategyId::Badge => "badge",
            StrategyId::Cpeal => "cpeal",
        }
    }

    pub fn cost_class(self) -> CostClass {
        match self {
            StrategyId::Coreset | StrategyId::Badge => CostClass::Quadratic,
            _ => CostClass::Linear,
        }
    }

    pub fn is_uncertainty(self) -> bool {
        matches!(
            self,
            StrategyId::Entropy | StrategyId::Softmax | StrategyId::Margin | StrategyId::Cpeal
        )
    }

    /// Whether the head is trained with the calibration term.
    pub fn trains_with_calibration(self) -> bool {
        self == StrategyId::Cpeal
    }

    /// Parses a comma-separated list such as `"random,entropy,cpeal"`.
    pub fn parse_list(s: &str) -> Result<Vec<StrategyId>> {
        let list = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(StrategyId::from_str)
            .collect::<Result<Vec<_>>>()?;
        if list.is_empty() {
            return Err(CpealError::validation("empty strategy list"));
        }
        Ok(list)
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyId {
    type Err = CpealError;

    fn from_str(s: &str) -> Result<Self> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                CpealError::validation(format!(
                    "unknown strategy '{s}' (expected one of random, entropy, softmax, margin, coreset, badge, cpeal)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Dataset row indices, all from the unlabeled pool.
    pub indices: Vec<usize>,
    pub elapsed: Duration,
}

impl Selection {
    pub fn elapsed_ms(&self) -> f64 {
        self.elapsed.as_secs_f64() * 1e3
    }
}

/// Rows per forward pass when scoring a pool. Keeps the working set small
/// and the cost per row flat as the pool grows.
const SCORE_CHUNK: usize = 512;

/// Scores `indices` in chunks of [`SCORE_CHUNK`] rows.
pub fn score_pool(strategy: StrategyId, head: &Head, ds: &EmbeddingDataset, indices: &[usize]) -> Result<ScoredPool> {
    let mut scores = Vec::with_capacity(indices.len());
    let mut preds = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(SCORE_CHUNK) {
        let (_, probs) = head.forward(&ds.gather(chunk))?;
        let part = score_uncertainty(strategy, &probs, chunk)?;
        scores.extend(part.scores);
        preds.extend(part.preds);
    }
    ScoredPool::new(indices.to_vec(), scores, preds)
}

/// Runs `strategy` over the unlabeled pool and returns `budget` row indices.
/// The wall time of the whole call, including the forward pass over the
/// pool, is recorded.
pub fn select(
    strategy: StrategyId,
    head: &Head,
    ds: &EmbeddingDataset,
    pool: &PoolState,
    budget: usize,
    seed: u64,
) -> Result<Selection> {
    let start = Instant::now();
    let unlabeled = pool.unlabeled();
    if budget == 0 {
        return Err(CpealError::validation("budget must be at least 1"));
    }
    if budget > unlabeled.len() {
        return Err(CpealError::selection(format!(
            "budget {budget} exceeds unlabeled pool of {}",
            unlabeled.len()
        )));
    }
    let indices = match strategy {
        StrategyId::Random => {
            let mut rng = rng_from_seed(mix_seed(&[seed, 0x4A4D]));
            rand::seq::index::sample(&mut rng, unlabeled.len(), budget)
                .into_iter()
                .map(|p| unlabeled[p])
                .collect()
        }
        s if s.is_uncertainty() => {
            let scored = score_pool(s, head, ds, &unlabeled)?;
            select_class_balanced(&scored, head.num_classes(), budget)?
        }
        StrategyId::Coreset => {
            let labeled = ds.gather(&pool.labeled());
            let feats = ds.gather(&unlabeled);
            select_coreset(&labeled, &feats, budget)?
                .into_iter()
                .map(|p| unlabeled[p])
                .collect()
        }
        StrategyId::Badge => {
            let feats = ds.gather(&unlabeled);
            let (_, probs) = head.forward(&feats)?;
            select_badge(&probs, &feats, budget, mix_seed(&[seed, 0xBAD6E]))?
                .into_iter()
                .map(|p| unlabeled[p])
                .collect()
        }
        _ => unreachable!("all strategies handled"),
    };
    Ok(Selection {
        indices,
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::{gen_synthetic, SynthSpec};
    use crate::heads::init_prompt_head;
    use std::collections::BTreeSet;

    fn setup() -> (EmbeddingDataset, PoolState, Head) {
        let ds = gen_synthetic(&SynthSpec {
            num_classes: 3,
            dim: 6,
            per_class: 30,
            class_separation: 4.0,
            within_class_scale: 1.0,
            test_fraction: 0.2,
            seed: 1,
        })
        .unwrap();
        let mut pool = PoolState::new(&ds);
        let first: Vec<usize> = pool.unlabeled().into_iter().take(3).collect();
        pool.reveal(&first).unwrap();
        (ds, pool, Head::Prompt(init_prompt_head(3, 6, 4).unwrap()))
    }

    #[test]
    fn parse_and_display() {
        let list = StrategyId::parse_list("random, entropy,CPEAL").unwrap();
        assert_eq!(list, vec![StrategyId::Random, StrategyId::Entropy, StrategyId::Cpeal]);
        assert!(StrategyId::parse_list("entropy,bald").is_err());
        assert!(StrategyId::parse_list(" , ").is_err());
        for id in StrategyId::ALL {
            assert_eq!(id.to_string().parse::<StrategyId>().unwrap(), id);
        }
        assert_eq!(StrategyId::Badge.cost_class(), CostClass::Quadratic);
        assert_eq!(StrategyId::Cpeal.cost_class(), CostClass::Linear);
    }

    #[test]
    fn every_strategy_returns_distinct_unlabeled_indices() {
        let (ds, pool, head) = setup();
        for s in StrategyId::ALL {
            for budget in [1, 3, 7] {
                let sel = select(s, &head, &ds, &pool, budget, 11).unwrap();
                let set: BTreeSet<usize> = sel.indices.iter().copied().collect();
                assert_eq!(set.len(), budget, "{s}");
                assert!(sel.indices.iter().all(|&i| !pool.is_labeled(i)));
                assert!(sel.indices.iter().all(|&i| ds.splits[i] == crate::datastore::Split::Train));
                let again = select(s, &head, &ds, &pool, budget, 11).unwrap();
                assert_eq!(sel.indices, again.indices, "{s} not deterministic");
            }
        }
    }

    #[test]
    fn budget_larger_than_pool_is_selection_error() {
        let (ds, pool, head) = setup();
        let n = pool.num_unlabeled();
        assert!(matches!(
            select(StrategyId::Entropy, &head, &ds, &pool, n + 1, 0),
            Err(CpealError::Selection(_))
        ));
    }
}
