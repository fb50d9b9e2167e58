//! Accuracy and top-label expected calibration error.

use std::io::Write;

use serde::Serialize;

use crate::error::{CpealError, Result};
use crate::heads::Probs;

pub const DEFAULT_ECE_BINS: usize = 15;

pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() {
        return Err(CpealError::validation("accuracy of an empty batch"));
    }
    if preds.len() != labels.len() {
        return Err(CpealError::validation(format!(
            "{} predictions vs {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EceBin {
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// 0 for empty bins.
    pub mean_confidence: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EceReport {
    pub n_bins: usize,
    pub bins: Vec<EceBin>,
    pub ece: f64,
}

impl EceReport {
    pub fn total_count(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// One CSV row per bin, for reliability diagrams.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for b in &self.bins {
            w.serialize(b)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// ECE of the max-probability confidence against top-label correctness.
pub fn ece(probs: &Probs, labels: &[usize], n_bins: usize) -> Result<EceReport> {
    if labels.len() != probs.len() {
        return Err(CpealError::validation(format!(
            "{} probability rows vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let correct: Vec<bool> = probs
        .predictions()
        .iter()
        .zip(labels)
        .map(|(p, y)| p == y)
        .collect();
    ece_from_confidences(&probs.confidences(), &correct, n_bins)
}

/// Equal-width bins over (0, 1]; a confidence `c` lands in bin
/// `ceil(c * n_bins)` (1-based), with `c = 0` going to bin 1.
pub fn ece_from_confidences(conf: &[f64], correct: &[bool], n_bins: usize) -> Result<EceReport> {
    if n_bins == 0 {
        return Err(CpealError::validation("n_bins must be at least 1"));
    }
    if conf.len() != correct.len() {
        return Err(CpealError::validation("confidence and correctness lengths differ"));
    }
    if conf.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(CpealError::validation("confidences must lie in [0, 1]"));
    }
    let mut count = vec![0usize; n_bins];
    let mut conf_sum = vec![0.0f64; n_bins];
    let mut hit_sum = vec![0usize; n_bins];
    for (&c, &ok) in conf.iter().zip(correct) {
        let b = ((c * n_bins as f64).ceil() as usize).clamp(1, n_bins) - 1;
        count[b] += 1;
        conf_sum[b] += c;
        hit_sum[b] += usize::from(ok);
    }
    let n = conf.len() as f64;
    let mut ece = 0.0;
    let bins = (0..n_bins)
        .map(|b| {
            let (mc, ma) = if count[b] == 0 {
                (0.0, 0.0)
            } else {
                let cnt = count[b] as f64;
                (conf_sum[b] / cnt, hit_sum[b] as f64 / cnt)
            };
            if count[b] > 0 {
                ece += count[b] as f64 / n * (ma - mc).abs();
            }
            EceBin {
                bin: b + 1,
                lower: b as f64 / n_bins as f64,
                upper: (b + 1) as f64 / n_bins as f64,
                count: count[b],
                mean_confidence: mc,
                mean_accuracy: ma,
            }
        })
        .collect();
    Ok(EceReport {
        n_bins,
        bins,
        ece: ece.clamp(0.0, 1.0),
    })
}
