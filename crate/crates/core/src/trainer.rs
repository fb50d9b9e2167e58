//! Mini-batch SGD on the labeled pool.
//!
//! One epoch at a constant warmup rate, then cosine decay from `base_lr` down
//! to zero at the last epoch. Weight decay only touches trainable tensors;
//! frozen class tokens and the frozen LoRA projection are never written.

use std::io::Write;

use ndarray::Axis;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::calibration::{anneal_alpha, loss_and_grad, Weighting};
use crate::datastore::{EmbeddingDataset, PoolState, Split};
use crate::error::{CpealError, Result};
use crate::heads::Head;
use crate::rng::{mix_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub warmup_lr: f64,
    pub warmup_epochs: usize,
    pub epochs: usize,
    /// Length of the cosine period in epochs after warmup. `None` spans all
    /// remaining epochs; `Some(n)` decays over `n` epochs and then holds the
    /// final (zero) rate.
    pub cosine_epochs: Option<usize>,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub alpha_final: f64,
    /// Ramp alpha linearly from 0 over the cycle's optimizer steps instead of
    /// holding it at `alpha_final`.
    pub anneal: bool,
    /// Composition-balanced gamma/beta; off means 0.5/0.5.
    pub interw: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 0.002,
            warmup_lr: 1e-5,
            warmup_epochs: 1,
            epochs: 200,
            cosine_epochs: None,
            weight_decay: 0.0005,
            batch_size: 32,
            alpha_final: 0.5,
            anneal: false,
            interw: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.base_lr) || !positive(self.warmup_lr) {
            return Err(CpealError::validation("learning rates must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(CpealError::validation("weight_decay must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(CpealError::validation("batch_size must be at least 1"));
        }
        if self.epochs == 0 || self.epochs < self.warmup_epochs {
            return Err(CpealError::validation(format!(
                "epochs ({}) must be >= warmup_epochs ({}) and positive",
                self.epochs, self.warmup_epochs
            )));
        }
        if self.cosine_epochs == Some(0) {
            return Err(CpealError::validation("cosine_epochs must be positive"));
        }
        if !(self.alpha_final >= 0.0 && self.alpha_final.is_finite()) {
            return Err(CpealError::validation("alpha_final must be non-negative"));
        }
        Ok(())
    }

    pub fn weighting(&self) -> Weighting {
        if self.interw {
            Weighting::Balanced
        } else {
            Weighting::Equal
        }
    }
}

/// Learning rate for `epoch` (0-based).
///
/// Warmup epochs use `warmup_lr`. Afterwards
/// `lr = 0.5 * base_lr * (1 + cos(pi * progress))` with progress running from
/// 0 at the first post-warmup epoch to 1 at the last epoch of the cosine
/// period.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(CpealError::validation(format!(
            "epoch {epoch} outside [0, {})",
            cfg.epochs
        )));
    }
    if epoch < cfg.warmup_epochs {
        return Ok(cfg.warmup_lr);
    }
    let span = cfg
        .cosine_epochs
        .unwrap_or(cfg.epochs - cfg.warmup_epochs);
    if span <= 1 {
        return Ok(cfg.base_lr);
    }
    let progress = ((epoch - cfg.warmup_epochs) as f64 / (span - 1) as f64).min(1.0);
    Ok(0.5 * cfg.base_lr * (1.0 + (std::f64::consts::PI * progress).cos()))
}

/// One optimizer step's diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub cycle: usize,
    pub epoch: usize,
    pub iter: usize,
    pub n_correct: usize,
    pub n_incorrect: usize,
    pub loss_ce: f64,
    pub loss_calib: f64,
    pub lr: f64,
    pub alpha: f64,
    #[serde(skip)]
    pub gamma: f64,
    #[serde(skip)]
    pub beta: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
}

impl TrainLog {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// CSV with columns
    /// `cycle,epoch,iter,n_correct,n_incorrect,loss_ce,loss_calib,lr,alpha`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.steps.is_empty() {
            w.write_record([
                "cycle", "epoch", "iter", "n_correct", "n_incorrect", "loss_ce", "loss_calib", "lr",
                "alpha",
            ])?;
        }
        for s in &self.steps {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Trains a copy of `head` on the labeled pool.
///
/// An empty labeled pool returns the head unchanged with an empty log. The
/// per-epoch shuffle is seeded from `(cfg.seed, pool.cycle, epoch)`, so the
/// result is a pure function of the inputs.
pub fn train_cycle(
    head: &Head,
    ds: &EmbeddingDataset,
    pool: &PoolState,
    cfg: &TrainConfig,
) -> Result<(Head, TrainLog)> {
    cfg.validate()?;
    let labeled = pool.labeled();
    if let Some(&i) = labeled.iter().find(|&&i| i >= ds.len() || ds.splits[i] != Split::Train) {
        return Err(CpealError::validation(format!(
            "labeled index {i} is not a train row"
        )));
    }
    let mut head = head.clone();
    let mut log = TrainLog::default();
    if labeled.is_empty() {
        return Ok((head, log));
    }

    let x = ds.gather(&labeled);
    let y = ds.gather_labels(&labeled);
    let n = labeled.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * steps_per_epoch;
    let weighting = cfg.weighting();
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(epoch, cfg)?;
        order.sort_unstable();
        let mut rng = rng_from_seed(mix_seed(&[cfg.seed, pool.cycle as u64, epoch as u64]));
        order.shuffle(&mut rng);
        for (iter, batch) in order.chunks(cfg.batch_size).enumerate() {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let alpha = if cfg.anneal {
                anneal_alpha(step, total_steps, cfg.alpha_final)?
            } else {
                cfg.alpha_final
            };
            let logits = head.logits(&xb)?;
            let (loss, grad_logits) = loss_and_grad(&logits, &yb, alpha, weighting)?;
            let grad = head.backward(&xb, &grad_logits)?;
            head.sgd_step(&grad, lr, cfg.weight_decay)?;
            log.steps.push(StepRecord {
                cycle: pool.cycle,
                epoch,
                iter,
                n_correct: loss.n_correct,
                n_incorrect: loss.n_incorrect,
                loss_ce: loss.ce,
                loss_calib: loss.calib,
                lr,
                alpha,
                gamma: loss.gamma,
                beta: loss.beta,
            });
            step += 1;
        }
    }
    Ok((head, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datastore::{gen_synthetic, SynthSpec};
    use crate::heads::{init_lora_head, init_prompt_head, seed_class_projection};
    use crate::metrics::accuracy;

    #[test]
    fn schedule_endpoints() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_schedule(0, &cfg).unwrap(), 1e-5);
        assert!((lr_schedule(1, &cfg).unwrap() - 0.002).abs() < 1e-15);
        assert!(lr_schedule(199, &cfg).unwrap().abs() < 1e-12);
        assert!(lr_schedule(200, &cfg).is_err());
        // monotone decay after warmup
        let lrs: Vec<f64> = (1..200).map(|e| lr_schedule(e, &cfg).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn short_cosine_period_holds_zero() {
        let cfg = TrainConfig {
            cosine_epochs: Some(5),
            ..TrainConfig::default()
        };
        assert!((lr_schedule(1, &cfg).unwrap() - 0.002).abs() < 1e-15);
        assert!(lr_schedule(5, &cfg).unwrap().abs() < 1e-12);
        assert_eq!(lr_schedule(100, &cfg).unwrap(), lr_schedule(5, &cfg).unwrap());
    }

    fn separable() -> EmbeddingDataset {
        gen_synthetic(&SynthSpec {
            num_classes: 4,
            dim: 8,
            per_class: 40,
            class_separation: 50.0,
            within_class_scale: 0.1,
            test_fraction: 0.25,
            seed: 3,
        })
        .unwrap()
    }

    fn four_per_class(ds: &EmbeddingDataset) -> PoolState {
        let mut pool = PoolState::new(ds);
        let mut picks = Vec::new();
        for c in 0..4u32 {
            picks.extend(
                ds.train_indices()
                    .into_iter()
                    .filter(|&i| ds.labels[i] == c)
                    .take(4),
            );
        }
        pool.reveal(&picks).unwrap();
        pool.cycle = 1;
        pool
    }

    #[test]
    fn empty_pool_returns_head_unchanged() {
        let ds = separable();
        let head = Head::Prompt(init_prompt_head(4, 8, 1).unwrap());
        let (out, log) = train_cycle(&head, &ds, &PoolState::new(&ds), &TrainConfig::default()).unwrap();
        assert_eq!(out, head);
        assert!(log.is_empty());
    }

    #[test]
    fn separable_data_reaches_full_training_accuracy() {
        let ds = separable();
        let pool = four_per_class(&ds);
        let cfg = TrainConfig {
            epochs: 50,
            seed: 5,
            ..TrainConfig::default()
        };
        let head = Head::Prompt(init_prompt_head(4, 8, 2).unwrap());
        let (trained, log) = train_cycle(&head, &ds, &pool, &cfg).unwrap();
        let x = ds.gather(&pool.labeled());
        let (_, probs) = trained.forward(&x).unwrap();
        let acc = accuracy(&probs.predictions(), &ds.gather_labels(&pool.labeled())).unwrap();
        assert_eq!(acc, 1.0);
        let first = log.steps.first().unwrap().n_incorrect;
        let last = log.steps.last().unwrap().n_incorrect;
        assert_eq!(last, 0);
        assert!(last <= first);
        for s in &log.steps {
            assert_eq!(s.n_correct + s.n_incorrect, 16);
            assert!((s.gamma + s.beta - 1.0).abs() < 1e-12);
        }
        match (&head, &trained) {
            (Head::Prompt(a), Head::Prompt(b)) => assert_eq!(a.class_tokens(), b.class_tokens()),
            _ => unreachable!(),
        }
    }

    #[test]
    fn lora_training_keeps_frozen_projection_and_is_deterministic() {
        let ds = separable();
        let pool = four_per_class(&ds);
        let cfg = TrainConfig {
            epochs: 20,
            interw: false,
            ..TrainConfig::default()
        };
        let w = seed_class_projection(&ds, 1, 0);
        let head = Head::Lora(init_lora_head(w.clone(), 2, 1).unwrap());
        let (a, log) = train_cycle(&head, &ds, &pool, &cfg).unwrap();
        let (b, _) = train_cycle(&head, &ds, &pool, &cfg).unwrap();
        assert_eq!(a, b);
        match &a {
            Head::Lora(l) => assert_eq!(l.frozen(), &w),
            _ => unreachable!(),
        }
        assert!(log.steps.iter().all(|s| s.gamma == 0.5 && s.beta == 0.5));
    }

    #[test]
    fn rejects_test_rows_and_zero_batch() {
        let ds = separable();
        let test_row = ds.test_indices()[0];
        let mut labeled = ds.train_indices();
        let unlabeled = labeled.split_off(2);
        let mut all_labeled = labeled.clone();
        all_labeled.push(test_row);
        let pool = PoolState::from_parts(all_labeled, unlabeled).unwrap();
        let head = Head::Prompt(init_prompt_head(4, 8, 1).unwrap());
        assert!(train_cycle(&head, &ds, &pool, &TrainConfig::default()).is_err());
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train_cycle(&head, &ds, &four_per_class(&ds), &cfg).is_err());
    }

    #[test]
    fn log_csv_header() {
        let mut out = Vec::new();
        TrainLog::default().write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap().trim(),
            "cycle,epoch,iter,n_correct,n_incorrect,loss_ce,loss_calib,lr,alpha"
        );
    }
}
