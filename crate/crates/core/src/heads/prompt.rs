//! Prompt-prototype head.
//!
//! Each class k owns a frozen unit-norm token `c_k` and `ctx` trainable context
//! vectors `V[k, j]`. The class prototype is
//! `t_k = normalize(c_k + pool_j V[k, j])` and the logit of sample `x` is
//! `tau * cos(x, t_k)`, where `pool` is a sum (default) or a mean over the
//! context vectors. This keeps the trainable tensor at `K x ctx x E` while the
//! frozen encoder path is reduced to the pooling and normalization.
//!
//! Mean pooling scales every prototype step by `1 / ctx` relative to sum
//! pooling; at the default learning rate it barely moves the prototypes on
//! small labeled pools.

use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{CpealError, Result};
use crate::rng::{mix_seed, rng_from_seed};

pub const DEFAULT_CONTEXT_LEN: usize = 16;
pub const DEFAULT_LOGIT_SCALE: f64 = 100.0;
const CONTEXT_INIT_STD: f64 = 0.02;

/// How a class's context vectors are reduced before being added to its token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextPooling {
    #[default]
    Sum,
    Mean,
}

impl ContextPooling {
    fn factor(self, ctx: usize) -> f64 {
        match self {
            ContextPooling::Sum => 1.0,
            ContextPooling::Mean => 1.0 / ctx as f64,
        }
    }
}

fn draw_context(k: usize, ctx: usize, e: usize, seed: u64) -> Array3<f64> {
    let mut rng = rng_from_seed(mix_seed(&[seed, 0x71]));
    let init = Normal::new(0.0, CONTEXT_INIT_STD).expect("valid std");
    Array3::from_shape_fn((k, ctx, e), |_| init.sample(&mut rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptHead {
    class_tokens: Array2<f64>,
    context: Array3<f64>,
    logit_scale: f64,
    pooling: ContextPooling,
}

/// Prompt head with the default 16 context vectors and logit scale 100.
pub fn init_prompt_head(num_classes: usize, dim: usize, seed: u64) -> Result<PromptHead> {
    PromptHead::new(num_classes, dim, DEFAULT_CONTEXT_LEN, DEFAULT_LOGIT_SCALE, seed)
}

impl PromptHead {
    pub fn new(
        num_classes: usize,
        dim: usize,
        context_len: usize,
        logit_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if num_classes == 0 || dim == 0 || context_len == 0 {
            return Err(CpealError::validation(format!(
                "prompt head needs K, E, ctx >= 1 (got {num_classes}, {dim}, {context_len})"
            )));
        }
        if !(logit_scale > 0.0 && logit_scale.is_finite()) {
            return Err(CpealError::validation("logit scale must be positive"));
        }
        let mut rng = rng_from_seed(mix_seed(&[seed, 0x70]));
        let mut class_tokens: Array2<f64> =
            Array2::from_shape_fn((num_classes, dim), |_| StandardNormal.sample(&mut rng));
        for mut row in class_tokens.rows_mut() {
            let norm = row.dot(&row).sqrt().max(f64::MIN_POSITIVE);
            row /= norm;
        }
        let context = draw_context(num_classes, context_len, dim, seed);
        Ok(PromptHead {
            class_tokens,
            context,
            logit_scale,
            pooling: ContextPooling::default(),
        })
    }

    /// Same frozen tokens, context redrawn from `seed` exactly as
    /// [`PromptHead::new`] would draw it.
    pub fn with_fresh_context(&self, seed: u64) -> Self {
        let (k, ctx, e) = self.context.dim();
        PromptHead {
            context: draw_context(k, ctx, e, seed),
            ..self.clone()
        }
    }

    pub fn with_pooling(mut self, pooling: ContextPooling) -> Self {
        self.pooling = pooling;
        self
    }

    /// Builds a head from explicit tensors.
    pub fn from_parts(class_tokens: Array2<f64>, context: Array3<f64>, logit_scale: f64) -> Result<Self> {
        let (k, e) = class_tokens.dim();
        let (ck, ctx, ce) = context.dim();
        if k == 0 || e == 0 || ctx == 0 || ck != k || ce != e {
            return Err(CpealError::validation(format!(
                "class tokens {:?} and context {:?} disagree",
                class_tokens.dim(),
                context.dim()
            )));
        }
        if !(logit_scale > 0.0 && logit_scale.is_finite()) {
            return Err(CpealError::validation("logit scale must be positive"));
        }
        Ok(PromptHead {
            class_tokens,
            context,
            logit_scale,
            pooling: ContextPooling::default(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_tokens.nrows()
    }

    pub fn dim(&self) -> usize {
        self.class_tokens.ncols()
    }

    pub fn context_len(&self) -> usize {
        self.context.dim().1
    }

    pub fn logit_scale(&self) -> f64 {
        self.logit_scale
    }

    pub fn pooling(&self) -> ContextPooling {
        self.pooling
    }

    pub fn class_tokens(&self) -> &Array2<f64> {
        &self.class_tokens
    }

    pub fn context(&self) -> &Array3<f64> {
        &self.context
    }

    pub(crate) fn context_mut(&mut self) -> &mut Array3<f64> {
        &mut self.context
    }

    /// `K * ctx * E`.
    pub fn trainable_params(&self) -> usize {
        self.context.len()
    }

    /// Unnormalized prototypes `c_k + pool_j V[k, j]`.
    fn raw_prototypes(&self) -> Array2<f64> {
        let pooled = self.context.sum_axis(Axis(1)) * self.pooling.factor(self.context_len());
        &self.class_tokens + &pooled
    }

    /// Unit-norm class prototypes, `K x E`.
    pub fn prototypes(&self) -> Array2<f64> {
        let mut t = self.raw_prototypes();
        for mut row in t.rows_mut() {
            let norm = row.dot(&row).sqrt().max(f64::MIN_POSITIVE);
            row /= norm;
        }
        t
    }

    pub(crate) fn logits_unchecked(&self, x: &Array2<f64>) -> Array2<f64> {
        let xn = normalize_rows(x);
        xn.dot(&self.prototypes().t()) * self.logit_scale
    }

    /// dL/dV from dL/dlogits. Every context vector of a class receives the
    /// same gradient, `dL/du_k` times the pooling factor.
    pub(crate) fn context_grad(&self, x: &Array2<f64>, grad_logits: &Array2<f64>) -> Array3<f64> {
        let raw = self.raw_prototypes();
        let norms: Vec<f64> = raw
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt().max(f64::MIN_POSITIVE))
            .collect();
        let t = self.prototypes();
        let xn = normalize_rows(x);
        let cos = xn.dot(&t.t());
        let gs = grad_logits * self.logit_scale;
        // sum_i G_ik xhat_i  -  (sum_i G_ik cos_ik) t_k
        let mut du = gs.t().dot(&xn);
        let radial = (&gs * &cos).sum_axis(Axis(0));
        for (k, mut row) in du.rows_mut().into_iter().enumerate() {
            row.scaled_add(-radial[k], &t.row(k));
            row /= norms[k];
        }
        let ctx = self.context_len();
        let mut grad = Array3::<f64>::zeros(self.context.dim());
        for k in 0..self.num_classes() {
            let share = du.row(k).mapv(|v| v * self.pooling.factor(ctx));
            for j in 0..ctx {
                grad.slice_mut(ndarray::s![k, j, ..]).assign(&share);
            }
        }
        grad
    }
}

/// Rows scaled to unit norm; all-zero rows stay zero.
fn normalize_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}
