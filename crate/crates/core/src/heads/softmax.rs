use ndarray::{Array2, ArrayView1, Axis};

/// Row-stochastic matrix: one probability vector over K classes per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Probs(Array2<f64>);

impl Probs {
    /// Wraps a matrix after checking that every row is a distribution
    /// (entries >= 0, row sums within 1e-6 of 1).
    pub fn new(p: Array2<f64>) -> crate::Result<Self> {
        for (i, row) in p.rows().into_iter().enumerate() {
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(crate::CpealError::validation(format!(
                    "row {i} has a negative or non-finite probability"
                )));
            }
            let s = row.sum();
            if (s - 1.0).abs() > 1e-6 {
                return Err(crate::CpealError::validation(format!(
                    "row {i} sums to {s}, not 1"
                )));
            }
        }
        Ok(Probs(p))
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.0.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }

    /// Predicted class per row, ties to the lowest index.
    pub fn predictions(&self) -> Vec<usize> {
        self.0.rows().into_iter().map(|r| argmax(&r)).collect()
    }

    /// Max-probability confidence per row.
    pub fn confidences(&self) -> Vec<f64> {
        self.0
            .rows()
            .into_iter()
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax<'a>(v: impl IntoIterator<Item = &'a f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &x) in v.into_iter().enumerate() {
        if i == 0 || x > best_val {
            best = i;
            best_val = x;
        }
    }
    best
}

/// Numerically stable log-softmax of one row.
pub fn log_softmax_row(z: ArrayView1<'_, f64>) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|&v| v - max - lse).collect()
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Array2<f64>) -> Probs {
    let mut p = logits.clone();
    for mut row in p.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    Probs(p)
}
