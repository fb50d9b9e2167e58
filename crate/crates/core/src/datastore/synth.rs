//! Gaussian-blob stand-in for frozen-encoder features.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{EmbeddingDataset, Split};
use crate::error::{CpealError, Result};
use crate::rng::{mix_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Minimum distance between any two class means.
    pub class_separation: f64,
    /// Standard deviation of the isotropic noise around each mean.
    #[serde(default = "default_scale")]
    pub within_class_scale: f64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_scale() -> f64 {
    1.0
}

fn default_test_fraction() -> f64 {
    0.25
}

impl SynthSpec {
    pub fn new(num_classes: usize, dim: usize, per_class: usize, class_separation: f64) -> Self {
        SynthSpec {
            num_classes,
            dim,
            per_class,
            class_separation,
            within_class_scale: default_scale(),
            test_fraction: default_test_fraction(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(CpealError::validation("num_classes must be at least 1"));
        }
        if self.dim == 0 {
            return Err(CpealError::validation("dim must be at least 1"));
        }
        if self.per_class == 0 {
            return Err(CpealError::validation(
                "per_class must be at least 1 (need n >= K)",
            ));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(CpealError::validation("class_separation must be positive"));
        }
        if !(self.within_class_scale > 0.0 && self.within_class_scale.is_finite()) {
            return Err(CpealError::validation("within_class_scale must be positive"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(CpealError::validation("test_fraction must lie in (0, 1)"));
        }
        let n = (self.per_class * self.num_classes) as f64;
        if n * self.test_fraction < 1.0 {
            return Err(CpealError::validation(
                "per_class * num_classes * test_fraction must be at least 1",
            ));
        }
        Ok(())
    }

    fn test_count(&self) -> usize {
        let n = self.per_class * self.num_classes;
        ((n as f64 * self.test_fraction).round() as usize).clamp(1, n)
    }
}

/// Class means at pairwise distance >= `class_separation`.
///
/// With K <= E the means sit on scaled coordinate axes,
/// `sep / sqrt(2) * e_k`, which puts every pair at exactly `sep`. Otherwise
/// random directions on a sphere of radius `sep` are re-drawn until the
/// constraint holds, growing the radius after each batch of failed attempts.
fn class_means(spec: &SynthSpec, rng: &mut Rng) -> Array2<f64> {
    let (k, e, sep) = (spec.num_classes, spec.dim, spec.class_separation);
    let mut means = Array2::<f64>::zeros((k, e));
    if k <= e {
        for c in 0..k {
            means[[c, c]] = sep / std::f64::consts::SQRT_2;
        }
        return means;
    }
    let mut radius = sep;
    loop {
        for _ in 0..200 {
            for c in 0..k {
                let mut v: Vec<f64> = (0..e).map(|_| StandardNormal.sample(rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.iter_mut().for_each(|x| *x *= radius / norm);
                means.row_mut(c).assign(&ndarray::ArrayView1::from(&v));
            }
            let ok = (0..k).all(|a| {
                (a + 1..k).all(|b| {
                    let d2: f64 = means
                        .row(a)
                        .iter()
                        .zip(means.row(b))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum();
                    d2.sqrt() >= sep
                })
            });
            if ok {
                return means;
            }
        }
        radius *= 1.25;
    }
}

/// Generates `per_class` isotropic Gaussian samples around each class mean.
///
/// Rows are shuffled, then a stratified `test_fraction` of every class is
/// tagged as test. The result depends only on `spec`.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<EmbeddingDataset> {
    spec.validate()?;
    let mut rng = rng_from_seed(mix_seed(&[spec.seed, 0x5157]));
    let means = class_means(spec, &mut rng);
    let (k, e) = (spec.num_classes, spec.dim);
    let n = k * spec.per_class;

    let mut labels: Vec<u32> = (0..k as u32)
        .flat_map(|c| std::iter::repeat_n(c, spec.per_class))
        .collect();
    labels.shuffle(&mut rng);

    let mut features = Array2::<f32>::zeros((n, e));
    for (mut row, &y) in features.rows_mut().into_iter().zip(&labels) {
        for (v, &mu) in row.iter_mut().zip(means.row(y as usize)) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = (mu + spec.within_class_scale * z) as f32;
        }
    }

    // Stratified split: floor share per class, remainder spread over the
    // first classes, test rows taken from a shuffled order within each class.
    let n_test = spec.test_count();
    let base = n_test / k;
    let extra = n_test % k;
    let mut splits = vec![Split::Train; n];
    for c in 0..k {
        let want = (base + usize::from(c < extra)).min(spec.per_class);
        let mut rows: Vec<usize> = (0..n).filter(|&i| labels[i] as usize == c).collect();
        rows.shuffle(&mut rng);
        for &i in rows.iter().take(want) {
            splits[i] = Split::Test;
        }
    }

    let class_names = (0..k).map(|c| format!("class_{c}")).collect();
    EmbeddingDataset::new(
        format!("synthetic-k{k}-e{e}-s{}", spec.seed),
        class_names,
        features,
        labels,
        splits,
    )
}
