use std::cmp::Ordering;

use super::StrategyId;
use crate::calibration::entropy_of;
use crate::error::{CpealError, Result};
use crate::heads::{argmax, Probs};

/// Informativeness score (larger = more informative) and predicted class for
/// every index of an unlabeled pool, in pool order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPool {
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
    pub preds: Vec<usize>,
}

impl ScoredPool {
    pub fn new(indices: Vec<usize>, scores: Vec<f64>, preds: Vec<usize>) -> Result<Self> {
        if indices.len() != scores.len() || indices.len() != preds.len() {
            return Err(CpealError::validation("scored pool columns differ in length"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(CpealError::validation("scores must be finite"));
        }
        Ok(ScoredPool {
            indices,
            scores,
            preds,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Scores each row of `probs` (one row per entry of `indices`).
///
/// - entropy / cpeal: `H(p)`
/// - softmax: `1 - max_k p_k`
/// - margin: `-(p_top1 - p_top2)`
pub fn score_uncertainty(strategy: StrategyId, probs: &Probs, indices: &[usize]) -> Result<ScoredPool> {
    if probs.is_empty() {
        return Err(CpealError::selection("empty unlabeled pool"));
    }
    if indices.len() != probs.len() {
        return Err(CpealError::validation(format!(
            "{} indices for {} probability rows",
            indices.len(),
            probs.len()
        )));
    }
    let mut scores = Vec::with_capacity(probs.len());
    let mut preds = Vec::with_capacity(probs.len());
    for i in 0..probs.len() {
        let row = probs.row(i);
        let pred = argmax(&row);
        let score = match strategy {
            StrategyId::Entropy | StrategyId::Cpeal => entropy_of(row.iter()),
            StrategyId::Softmax => 1.0 - row[pred],
            StrategyId::Margin => {
                let second = row
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != pred)
                    .map(|(_, &v)| v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let second = if second.is_finite() { second } else { 0.0 };
                -(row[pred] - second)
            }
            other => {
                return Err(CpealError::validation(format!(
                    "{other} is not an uncertainty strategy"
                )))
            }
        };
        scores.push(score);
        preds.push(pred);
    }
    ScoredPool::new(indices.to_vec(), scores, preds)
}

/// Higher score first, then earlier position.
fn rank(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Class-balanced top-B on predicted classes.
///
/// First the best-scoring sample of each predicted class is taken (classes in
/// index order; if `budget < K` only the `budget` strongest class winners are
/// kept). Remaining slots are filled in global score order. Ties go to the
/// earlier pool position.
pub fn select_class_balanced(scored: &ScoredPool, num_classes: usize, budget: usize) -> Result<Vec<usize>> {
    if scored.len() < budget || scored.len() < num_classes.min(budget) {
        return Err(CpealError::selection(format!(
            "pool of {} cannot supply {budget} samples",
            scored.len()
        )));
    }
    let mut best: Vec<Option<usize>> = vec![None; num_classes];
    for (pos, &c) in scored.preds.iter().enumerate() {
        if c >= num_classes {
            return Err(CpealError::validation(format!("predicted class {c} >= {num_classes}")));
        }
        match best[c] {
            Some(b) if rank(&scored.scores, b, pos) != Ordering::Greater => {}
            _ => best[c] = Some(pos),
        }
    }
    let mut winners: Vec<usize> = best.into_iter().flatten().collect();
    if winners.len() > budget {
        winners.sort_by(|&a, &b| rank(&scored.scores, a, b));
        winners.truncate(budget);
        winners.sort_by_key(|&p| scored.preds[p]);
    }

    let mut taken = vec![false; scored.len()];
    for &p in &winners {
        taken[p] = true;
    }
    let need = budget - winners.len();
    let mut chosen = winners;
    if need > 0 {
        let mut rest: Vec<usize> = (0..scored.len()).filter(|&p| !taken[p]).collect();
        if need < rest.len() {
            rest.select_nth_unstable_by(need - 1, |&a, &b| rank(&scored.scores, a, b));
            rest.truncate(need);
        }
        rest.sort_by(|&a, &b| rank(&scored.scores, a, b));
        chosen.extend(rest);
    }
    Ok(chosen.into_iter().map(|p| scored.indices[p]).collect())
}
