//! Entropy-calibration objective.
//!
//! A mini-batch is split into correctly and incorrectly predicted samples.
//! Incorrect samples are pushed towards high predictive entropy with
//! `-log(tanh(H) + eps)`, correct ones towards low entropy with
//! `-log(1 - tanh(H) + eps)`. The two means are mixed with weights that
//! follow the batch composition,
//!
//! ```text
//! gamma = n_incorrect / n        (weight of the correct-sample term)
//! beta  = n_correct   / n        (weight of the incorrect-sample term)
//! L_calib = gamma * L_C + beta * L_I
//! L       = L_CE + alpha * L_calib
//! ```
//!
//! The mean over an empty set is taken as 0, so all-correct and
//! all-incorrect batches have `L_calib = 0`. Entropy uses the natural log.

use ndarray::{Array2, ArrayView1};

use crate::error::{CpealError, Result};
use crate::heads::{log_softmax_row, softmax_rows, Probs};

/// Added inside both logarithms of the calibration terms.
pub const EPSILON: f64 = 1e-6;

/// How the correct/incorrect terms are weighted inside a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// `gamma = n_incorrect / n`, `beta = n_correct / n`.
    #[default]
    Balanced,
    /// `gamma = beta = 0.5`.
    Equal,
}

/// Loss breakdown for one mini-batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibBatchLoss {
    pub ce: f64,
    /// Mean `-log(tanh(H) + eps)` over incorrect samples.
    pub incorrect: f64,
    /// Mean `-log(1 - tanh(H) + eps)` over correct samples.
    pub correct: f64,
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub n_correct: usize,
    pub n_incorrect: usize,
    pub calib: f64,
    pub total: f64,
}

/// Index sets of incorrect and correct predictions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Partition {
    pub incorrect: Vec<usize>,
    pub correct: Vec<usize>,
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(CpealError::validation("probabilities must be finite and non-negative"));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-6 {
        return Err(CpealError::validation(format!("probabilities sum to {s}")));
    }
    Ok(entropy_of(p.iter()))
}

/// Entropy without validation; zero entries contribute nothing.
pub(crate) fn entropy_of<'a>(p: impl IntoIterator<Item = &'a f64>) -> f64 {
    let h: f64 = p
        .into_iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum();
    h.max(0.0)
}

pub fn partition(preds: &[usize], labels: &[usize]) -> Result<Partition> {
    if preds.len() != labels.len() {
        return Err(CpealError::validation(format!(
            "{} predictions vs {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut out = Partition::default();
    for (i, (p, y)) in preds.iter().zip(labels).enumerate() {
        if p == y {
            out.correct.push(i);
        } else {
            out.incorrect.push(i);
        }
    }
    Ok(out)
}

/// `(gamma, beta)` for the given counts.
pub fn batch_weights(n_correct: usize, n_incorrect: usize, weighting: Weighting) -> (f64, f64) {
    match weighting {
        Weighting::Equal => (0.5, 0.5),
        Weighting::Balanced => {
            let n = (n_correct + n_incorrect) as f64;
            if n == 0.0 {
                (0.0, 0.0)
            } else {
                (n_incorrect as f64 / n, n_correct as f64 / n)
            }
        }
    }
}

#[inline]
fn incorrect_term(h: f64) -> f64 {
    -(h.tanh() + EPSILON).ln()
}

#[inline]
fn correct_term(h: f64) -> f64 {
    -(1.0 - h.tanh() + EPSILON).ln()
}

fn check_labels(labels: &[usize], m: usize, k: usize) -> Result<()> {
    if m == 0 {
        return Err(CpealError::validation("empty batch"));
    }
    if labels.len() != m {
        return Err(CpealError::validation(format!("{m} rows but {} labels", labels.len())));
    }
    if let Some(y) = labels.iter().find(|&&y| y >= k) {
        return Err(CpealError::validation(format!("label {y} outside [0, {k})")));
    }
    Ok(())
}

fn assemble(
    ce_sum: f64,
    entropies: &[f64],
    part: &Partition,
    alpha: f64,
    weighting: Weighting,
) -> CalibBatchLoss {
    let m = entropies.len() as f64;
    let mean = |idx: &[usize], f: fn(f64) -> f64| {
        if idx.is_empty() {
            0.0
        } else {
            idx.iter().map(|&i| f(entropies[i])).sum::<f64>() / idx.len() as f64
        }
    };
    let incorrect = mean(&part.incorrect, incorrect_term);
    let correct = mean(&part.correct, correct_term);
    let (gamma, beta) = batch_weights(part.correct.len(), part.incorrect.len(), weighting);
    let calib = gamma * correct + beta * incorrect;
    let ce = ce_sum / m;
    CalibBatchLoss {
        ce,
        incorrect,
        correct,
        gamma,
        beta,
        alpha,
        n_correct: part.correct.len(),
        n_incorrect: part.incorrect.len(),
        calib,
        total: ce + alpha * calib,
    }
}

/// Batch loss from probabilities with composition-balanced weights.
pub fn calib_loss(probs: &Probs, labels: &[usize], alpha: f64) -> Result<CalibBatchLoss> {
    calib_loss_weighted(probs, labels, alpha, Weighting::Balanced)
}

pub fn calib_loss_weighted(
    probs: &Probs,
    labels: &[usize],
    alpha: f64,
    weighting: Weighting,
) -> Result<CalibBatchLoss> {
    check_labels(labels, probs.len(), probs.num_classes())?;
    let preds = probs.predictions();
    let part = partition(&preds, labels)?;
    let entropies: Vec<f64> = (0..probs.len()).map(|i| entropy_of(probs.row(i))).collect();
    let ce_sum: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs.row(i)[y].max(f64::MIN_POSITIVE).ln())
        .sum();
    Ok(assemble(ce_sum, &entropies, &part, alpha, weighting))
}

/// dH/dz for one row given its log-probabilities: `-p_j (log p_j + H)`.
fn entropy_grad(logp: &[f64], h: f64, out: &mut [f64]) {
    for (o, &lp) in out.iter_mut().zip(logp) {
        let p = lp.exp();
        *o = -p * (lp + h);
    }
}

/// Loss breakdown and `dL/dlogits` in one pass.
///
/// The partition and `(gamma, beta)` are constants of the forward pass: no
/// gradient flows through the argmax or the counts.
pub fn loss_and_grad(
    logits: &Array2<f64>,
    labels: &[usize],
    alpha: f64,
    weighting: Weighting,
) -> Result<(CalibBatchLoss, Array2<f64>)> {
    let (m, k) = logits.dim();
    check_labels(labels, m, k)?;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(CpealError::validation("logits contain non-finite values"));
    }
    let preds = softmax_rows(logits).predictions();
    let part = partition(&preds, labels)?;
    let (gamma, beta) = batch_weights(part.correct.len(), part.incorrect.len(), weighting);

    let mut grad = Array2::<f64>::zeros((m, k));
    let mut entropies = vec![0.0; m];
    let mut ce_sum = 0.0;
    let mut dh = vec![0.0; k];
    let w_correct = if part.correct.is_empty() { 0.0 } else { gamma / part.correct.len() as f64 };
    let w_incorrect = if part.incorrect.is_empty() { 0.0 } else { beta / part.incorrect.len() as f64 };

    for i in 0..m {
        let logp = log_softmax_row(logits.row(i));
        let h = (-logp.iter().map(|&lp| lp.exp() * lp).sum::<f64>()).max(0.0);
        entropies[i] = h;
        ce_sum -= logp[labels[i]];

        let mut row = grad.row_mut(i);
        for (j, g) in row.iter_mut().enumerate() {
            let onehot = if j == labels[i] { 1.0 } else { 0.0 };
            *g = (logp[j].exp() - onehot) / m as f64;
        }
        if alpha != 0.0 {
            let t = h.tanh();
            let dt = 1.0 - t * t;
            let coeff = if preds[i] == labels[i] {
                w_correct * dt / (1.0 - t + EPSILON)
            } else {
                -w_incorrect * dt / (t + EPSILON)
            };
            if coeff != 0.0 {
                entropy_grad(&logp, h, &mut dh);
                for (g, &d) in row.iter_mut().zip(&dh) {
                    *g += alpha * coeff * d;
                }
            }
        }
    }
    Ok((assemble(ce_sum, &entropies, &part, alpha, weighting), grad))
}

/// `dL/dlogits` with composition-balanced weights.
pub fn grad_total_loss(logits: &Array2<f64>, labels: &[usize], alpha: f64) -> Result<Array2<f64>> {
    Ok(loss_and_grad(logits, labels, alpha, Weighting::Balanced)?.1)
}

pub fn grad_total_loss_weighted(
    logits: &Array2<f64>,
    labels: &[usize],
    alpha: f64,
    weighting: Weighting,
) -> Result<Array2<f64>> {
    Ok(loss_and_grad(logits, labels, alpha, weighting)?.1)
}

/// Linear ramp `alpha_final * step / total_steps`.
pub fn anneal_alpha(step: usize, total_steps: usize, alpha_final: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(CpealError::validation("total_steps must be at least 1"));
    }
    if step > total_steps {
        return Err(CpealError::validation(format!(
            "step {step} beyond total_steps {total_steps}"
        )));
    }
    if !(alpha_final >= 0.0) || !alpha_final.is_finite() {
        return Err(CpealError::validation("alpha_final must be finite and non-negative"));
    }
    Ok(alpha_final * step as f64 / total_steps as f64)
}

/// `tanh(H(p))`, the bounded uncertainty the calibration terms act on.
pub fn squashed_entropy(p: ArrayView1<'_, f64>) -> f64 {
    entropy_of(p.iter()).tanh()
}
