use ndarray::{Array2, ArrayView1};

use crate::error::{CpealError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn tag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Split> {
        match tag {
            0 => Some(Split::Train),
            1 => Some(Split::Test),
            _ => None,
        }
    }
}

/// Frozen-encoder output: one feature row per sample, an integer class label
/// and a train/test tag.
///
/// Features are kept as `f32`, the on-disk precision, so that a save/load
/// cycle is bit-exact. Model code converts rows to `f64` on the way in.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    pub name: String,
    pub class_names: Vec<String>,
    pub features: Array2<f32>,
    pub labels: Vec<u32>,
    pub splits: Vec<Split>,
}

impl EmbeddingDataset {
    /// Builds a dataset and checks every invariant.
    pub fn new(
        name: impl Into<String>,
        class_names: Vec<String>,
        features: Array2<f32>,
        labels: Vec<u32>,
        splits: Vec<Split>,
    ) -> Result<Self> {
        let ds = EmbeddingDataset {
            name: name.into(),
            class_names,
            features,
            labels,
            splits,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f32> {
        self.features.row(i)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let k = self.num_classes();
        if self.dim() == 0 {
            return Err(CpealError::validation("embedding dimension must be positive"));
        }
        if k == 0 {
            return Err(CpealError::validation("dataset needs at least one class"));
        }
        if self.labels.len() != n || self.splits.len() != n {
            return Err(CpealError::validation(format!(
                "row count mismatch: {} feature rows, {} labels, {} split tags",
                n,
                self.labels.len(),
                self.splits.len()
            )));
        }
        if n < k {
            return Err(CpealError::validation(format!(
                "dataset has {n} rows but {k} classes"
            )));
        }
        if let Some((pos, _)) = self
            .features
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(CpealError::validation(format!(
                "non-finite feature at row {}, column {}",
                pos / self.dim(),
                pos % self.dim()
            )));
        }
        if let Some((i, &y)) = self
            .labels
            .iter()
            .enumerate()
            .find(|(_, &y)| y as usize >= k)
        {
            return Err(CpealError::validation(format!(
                "label {y} at row {i} is outside [0, {k})"
            )));
        }
        if !self.splits.contains(&Split::Test) {
            return Err(CpealError::validation("dataset has no test rows"));
        }
        Ok(())
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.indices_of(Split::Train)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.indices_of(Split::Test)
    }

    /// Gathers the given rows as an `f64` matrix.
    pub fn gather(&self, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((indices.len(), self.dim()));
        for (dst, &i) in out.rows_mut().into_iter().zip(indices) {
            for (d, &s) in dst.into_iter().zip(self.features.row(i)) {
                *d = s as f64;
            }
        }
        out
    }

    pub fn gather_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i] as usize).collect()
    }
}
