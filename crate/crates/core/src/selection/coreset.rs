//! k-center greedy (farthest-first traversal).

use ndarray::{Array2, ArrayView1};

use crate::error::{CpealError, Result};

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Picks `budget` rows of `unlabeled` (positions returned in pick order).
///
/// Each step takes the point farthest, in Euclidean distance, from everything
/// covered so far (labeled rows plus earlier picks). With no labeled rows the
/// first pick is position 0. Ties go to the lowest position.
pub fn select_coreset(labeled: &Array2<f64>, unlabeled: &Array2<f64>, budget: usize) -> Result<Vec<usize>> {
    let n = unlabeled.nrows();
    if budget > n {
        return Err(CpealError::selection(format!(
            "budget {budget} exceeds unlabeled pool of {n}"
        )));
    }
    if labeled.nrows() > 0 && labeled.ncols() != unlabeled.ncols() {
        return Err(CpealError::validation("labeled and unlabeled widths differ"));
    }
    if budget == 0 {
        return Ok(Vec::new());
    }

    let mut min_d = vec![f64::INFINITY; n];
    for (i, d) in min_d.iter_mut().enumerate() {
        for l in labeled.rows() {
            *d = d.min(sq_dist(unlabeled.row(i), l));
        }
    }

    let mut picks = Vec::with_capacity(budget);
    let mut taken = vec![false; n];
    while picks.len() < budget {
        let next = if picks.is_empty() && labeled.nrows() == 0 {
            0
        } else {
            let mut best = usize::MAX;
            for i in 0..n {
                if !taken[i] && (best == usize::MAX || min_d[i] > min_d[best]) {
                    best = i;
                }
            }
            best
        };
        taken[next] = true;
        picks.push(next);
        let center = unlabeled.row(next);
        for i in 0..n {
            if !taken[i] {
                min_d[i] = min_d[i].min(sq_dist(unlabeled.row(i), center));
            }
        }
    }
    Ok(picks)
}
