//! BADGE: k-means++ seeding over last-layer gradient embeddings.

use ndarray::Array2;
use rand::Rng as _;

use crate::error::{CpealError, Result};
use crate::heads::Probs;
use crate::rng::rng_from_seed;

/// `g_i = (p_i - onehot(yhat_i)) (x) x_i`, flattened class-major to `K * E`.
pub fn gradient_embeddings(probs: &Probs, feats: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, e) = feats.dim();
    if probs.len() != n {
        return Err(CpealError::validation(format!(
            "{} probability rows for {n} feature rows",
            probs.len()
        )));
    }
    let k = probs.num_classes();
    let preds = probs.predictions();
    let mut g = Array2::<f64>::zeros((n, k * e));
    for i in 0..n {
        let p = probs.row(i);
        let x = feats.row(i);
        let mut out = g.row_mut(i);
        for c in 0..k {
            let coef = p[c] - if c == preds[i] { 1.0 } else { 0.0 };
            for (j, &xv) in x.iter().enumerate() {
                out[c * e + j] = coef * xv;
            }
        }
    }
    Ok(g)
}

/// k-means++ seeding of `budget` centers among the gradient embeddings;
/// returns the chosen positions in seeding order.
///
/// Random draws, one uniform `u` in [0, 1) per center:
/// - first center: position `floor(u * n)`;
/// - later centers: the first unchosen position whose running sum of squared
///   distances to the nearest chosen center exceeds `u * total`;
/// - if every unchosen point coincides with a center (`total == 0`): the
///   `floor(u * r)`-th of the `r` unchosen positions.
pub fn select_badge(probs: &Probs, feats: &Array2<f64>, budget: usize, seed: u64) -> Result<Vec<usize>> {
    let n = feats.nrows();
    if budget > n {
        return Err(CpealError::selection(format!(
            "budget {budget} exceeds unlabeled pool of {n}"
        )));
    }
    if budget == 0 {
        return Ok(Vec::new());
    }
    let g = gradient_embeddings(probs, feats)?;
    let mut rng = rng_from_seed(seed);
    let mut chosen = vec![false; n];
    let mut d2 = vec![f64::INFINITY; n];
    let mut picks = Vec::with_capacity(budget);

    let first = ((rng.random::<f64>() * n as f64) as usize).min(n - 1);
    let mut center = first;
    loop {
        chosen[center] = true;
        picks.push(center);
        if picks.len() == budget {
            break;
        }
        let c = g.row(center);
        for (i, d) in d2.iter_mut().enumerate() {
            if chosen[i] {
                *d = 0.0;
                continue;
            }
            let dist: f64 = g.row(i).iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < *d {
                *d = dist;
            }
        }
        let total: f64 = d2.iter().sum();
        let u = rng.random::<f64>();
        center = if total > 0.0 {
            let target = u * total;
            let mut acc = 0.0;
            let mut pick = None;
            let mut last_positive = None;
            for (i, &d) in d2.iter().enumerate() {
                if chosen[i] || d <= 0.0 {
                    continue;
                }
                last_positive = Some(i);
                acc += d;
                if acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.or(last_positive).expect("positive total implies a candidate")
        } else {
            let rest: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            rest[((u * rest.len() as f64) as usize).min(rest.len() - 1)]
        };
    }
    Ok(picks)
}
