//! Low-rank adapter head: `logits = X (W + s * A B)` with `W` frozen.

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::datastore::EmbeddingDataset;
use crate::error::{CpealError, Result};
use crate::rng::{mix_seed, rng_from_seed};

const A_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct LoraHead {
    frozen: Array2<f64>,
    a: Array2<f64>,
    b: Array2<f64>,
    scale: f64,
}

/// LoRA head with `lora_scale = 1`: `A ~ N(0, 0.02^2)`, `B = 0`, so the head
/// reproduces `X W` exactly until the first update.
pub fn init_lora_head(frozen: Array2<f64>, rank: usize, seed: u64) -> Result<LoraHead> {
    LoraHead::new(frozen, rank, 1.0, seed)
}

impl LoraHead {
    pub fn new(frozen: Array2<f64>, rank: usize, scale: f64, seed: u64) -> Result<Self> {
        let (e, k) = frozen.dim();
        if rank == 0 {
            return Err(CpealError::validation("LoRA rank must be at least 1"));
        }
        if e == 0 || k == 0 {
            return Err(CpealError::validation("frozen projection must be non-empty"));
        }
        if frozen.iter().any(|v| !v.is_finite()) {
            return Err(CpealError::validation("frozen projection has non-finite entries"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(CpealError::validation("lora_scale must be positive"));
        }
        let mut rng = rng_from_seed(mix_seed(&[seed, 0x10A]));
        let init = Normal::new(0.0, A_INIT_STD).expect("valid std");
        let a = Array2::from_shape_fn((e, rank), |_| init.sample(&mut rng));
        let b = Array2::zeros((rank, k));
        Ok(LoraHead {
            frozen,
            a,
            b,
            scale,
        })
    }

    pub fn from_parts(frozen: Array2<f64>, a: Array2<f64>, b: Array2<f64>, scale: f64) -> Result<Self> {
        let (e, k) = frozen.dim();
        if a.nrows() != e || b.ncols() != k || a.ncols() != b.nrows() || a.ncols() == 0 {
            return Err(CpealError::validation(format!(
                "inconsistent LoRA shapes W {:?}, A {:?}, B {:?}",
                frozen.dim(),
                a.dim(),
                b.dim()
            )));
        }
        Ok(LoraHead {
            frozen,
            a,
            b,
            scale,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.frozen.ncols()
    }

    pub fn dim(&self) -> usize {
        self.frozen.nrows()
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// False when the rank reaches `min(E, K)`; such heads work but are no
    /// longer low-rank.
    pub fn is_low_rank(&self) -> bool {
        self.rank() <= self.dim().min(self.num_classes())
    }

    pub fn frozen(&self) -> &Array2<f64> {
        &self.frozen
    }

    pub fn factors(&self) -> (&Array2<f64>, &Array2<f64>) {
        (&self.a, &self.b)
    }

    pub(crate) fn factors_mut(&mut self) -> (&mut Array2<f64>, &mut Array2<f64>) {
        (&mut self.a, &mut self.b)
    }

    /// `r (E + K)`.
    pub fn trainable_params(&self) -> usize {
        self.a.len() + self.b.len()
    }

    /// `W + s A B`.
    pub fn effective_weight(&self) -> Array2<f64> {
        &self.frozen + &(self.a.dot(&self.b) * self.scale)
    }

    pub(crate) fn logits_unchecked(&self, x: &Array2<f64>) -> Array2<f64> {
        let base = x.dot(&self.frozen);
        if self.b.iter().all(|&v| v == 0.0) {
            return base;
        }
        base + x.dot(&self.a).dot(&self.b) * self.scale
    }

    pub(crate) fn factor_grads(&self, x: &Array2<f64>, g: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let xa = x.dot(&self.a);
        let da = x.t().dot(g).dot(&self.b.t()) * self.scale;
        let db = xa.t().dot(g) * self.scale;
        (da, db)
    }
}

/// Frozen projection whose column k is the mean of `shots` randomly chosen
/// train rows of class k. Classes with no train rows get a zero column.
pub fn seed_class_projection(ds: &EmbeddingDataset, shots: usize, seed: u64) -> Array2<f64> {
    let (e, k) = (ds.dim(), ds.num_classes());
    let mut rng = rng_from_seed(mix_seed(&[seed, 0xC1A5]));
    let train = ds.train_indices();
    let mut w = Array2::<f64>::zeros((e, k));
    for c in 0..k {
        let members: Vec<usize> = train
            .iter()
            .copied()
            .filter(|&i| ds.labels[i] as usize == c)
            .collect();
        let chosen: Vec<usize> = members
            .choose_multiple(&mut rng, shots.max(1))
            .copied()
            .collect();
        if chosen.is_empty() {
            continue;
        }
        for &i in &chosen {
            for (d, &v) in w.column_mut(c).iter_mut().zip(ds.row(i)) {
                *d += v as f64;
            }
        }
        w.column_mut(c).mapv_inplace(|v| v / chosen.len() as f64);
    }
    w
}

/// Random `E x K` projection with orthonormal columns (Gram-Schmidt). When
/// `K > E` the columns beyond the first E are only normalized.
pub fn random_orthonormal_projection(dim: usize, num_classes: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_from_seed(mix_seed(&[seed, 0x0E7]));
    let mut w = Array2::from_shape_fn((dim, num_classes), |_| StandardNormal.sample(&mut rng));
    for c in 0..num_classes {
        let mut col = w.column(c).to_owned();
        if c < dim {
            for prev in 0..c {
                let p = w.column(prev);
                let proj: f64 = col.dot(&p);
                col.scaled_add(-proj, &p);
            }
        }
        let norm = col.dot(&col).sqrt().max(f64::MIN_POSITIVE);
        w.column_mut(c).assign(&(col / norm));
    }
    w
}
