//! Parameter-efficient classification heads over frozen embeddings.
//!
//! Both heads map an `m x E` feature batch to `m x K` logits. Only the
//! trainable tensors move during training: the context vectors of
//! [`PromptHead`] or the low-rank factors of [`LoraHead`].

mod checkpoint;
mod lora;
mod prompt;
mod softmax;

pub use checkpoint::{load_head, read_head, save_head, write_head};
pub use lora::{init_lora_head, random_orthonormal_projection, seed_class_projection, LoraHead};
pub use prompt::{init_prompt_head, ContextPooling, PromptHead, DEFAULT_CONTEXT_LEN, DEFAULT_LOGIT_SCALE};
pub use softmax::{argmax, log_softmax_row, softmax_rows, Probs};

use ndarray::Array2;

use crate::error::{CpealError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Prompt(PromptHead),
    Lora(LoraHead),
}

/// Gradient of a scalar loss with respect to a head's trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadGrad {
    Prompt { context: ndarray::Array3<f64> },
    Lora { a: Array2<f64>, b: Array2<f64> },
}

impl Head {
    pub fn num_classes(&self) -> usize {
        match self {
            Head::Prompt(h) => h.num_classes(),
            Head::Lora(h) => h.num_classes(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Head::Prompt(h) => h.dim(),
            Head::Lora(h) => h.dim(),
        }
    }

    pub fn trainable_params(&self) -> usize {
        match self {
            Head::Prompt(h) => h.trainable_params(),
            Head::Lora(h) => h.trainable_params(),
        }
    }

    pub fn logits(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_batch(x, self.dim())?;
        Ok(match self {
            Head::Prompt(h) => h.logits_unchecked(x),
            Head::Lora(h) => h.logits_unchecked(x),
        })
    }

    /// Logits and row-wise softmax probabilities.
    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Probs)> {
        let logits = self.logits(x)?;
        let probs = softmax_rows(&logits);
        Ok((logits, probs))
    }

    /// Back-propagates `grad_logits` (dL/dlogits, `m x K`) to the trainable
    /// tensors.
    pub fn backward(&self, x: &Array2<f64>, grad_logits: &Array2<f64>) -> Result<HeadGrad> {
        check_batch(x, self.dim())?;
        if grad_logits.dim() != (x.nrows(), self.num_classes()) {
            return Err(CpealError::validation(format!(
                "gradient shape {:?} does not match ({}, {})",
                grad_logits.dim(),
                x.nrows(),
                self.num_classes()
            )));
        }
        Ok(match self {
            Head::Prompt(h) => HeadGrad::Prompt {
                context: h.context_grad(x, grad_logits),
            },
            Head::Lora(h) => {
                let (a, b) = h.factor_grads(x, grad_logits);
                HeadGrad::Lora { a, b }
            }
        })
    }

    /// One SGD update with decoupled-from-frozen L2 weight decay:
    /// `p <- p - lr * (g + weight_decay * p)` for trainable tensors only.
    pub fn sgd_step(&mut self, grad: &HeadGrad, lr: f64, weight_decay: f64) -> Result<()> {
        match (self, grad) {
            (Head::Prompt(h), HeadGrad::Prompt { context }) => {
                sgd_update(h.context_mut(), context, lr, weight_decay);
            }
            (Head::Lora(h), HeadGrad::Lora { a, b }) => {
                let (pa, pb) = h.factors_mut();
                sgd_update(pa, a, lr, weight_decay);
                sgd_update(pb, b, lr, weight_decay);
            }
            _ => return Err(CpealError::validation("gradient kind does not match head")),
        }
        Ok(())
    }
}

fn sgd_update<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
    lr: f64,
    weight_decay: f64,
) {
    ndarray::Zip::from(param)
        .and(grad)
        .for_each(|p, &g| *p -= lr * (g + weight_decay * *p));
}

pub(crate) fn check_batch(x: &Array2<f64>, dim: usize) -> Result<()> {
    if x.ncols() != dim {
        return Err(CpealError::validation(format!(
            "feature batch has {} columns, head expects {dim}",
            x.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CpealError::validation("feature batch contains non-finite values"));
    }
    Ok(())
}
