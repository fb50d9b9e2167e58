//! Aggregation of `results.csv` files into per-(strategy, cycle) summaries.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ResultRow, RESULTS_HEADER};
use crate::error::{CpealError, Result};
use crate::selection::StrategyId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub strategy: StrategyId,
    pub cycle: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub ece_mean: f64,
    pub ece_std: f64,
    /// `acc_mean` minus the entropy baseline at the same cycle, when present.
    pub delta_vs_entropy: Option<f64>,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// Groups rows by `(strategy, cycle)`. Strategies keep first-appearance
    /// order, cycles are ascending. Std is the sample std (0 for one run).
    pub fn from_rows(rows: &[ResultRow]) -> Summary {
        let mut strategies: Vec<StrategyId> = Vec::new();
        for r in rows {
            if !strategies.contains(&r.strategy) {
                strategies.push(r.strategy);
            }
        }
        let mut out = Vec::new();
        for &s in &strategies {
            let mut cycles: Vec<usize> = rows.iter().filter(|r| r.strategy == s).map(|r| r.cycle).collect();
            cycles.sort_unstable();
            cycles.dedup();
            for c in cycles {
                let group: Vec<&ResultRow> = rows.iter().filter(|r| r.strategy == s && r.cycle == c).collect();
                let acc: Vec<f64> = group.iter().map(|r| r.accuracy).collect();
                let ece: Vec<f64> = group.iter().map(|r| r.ece).collect();
                let (acc_mean, acc_std) = mean_std(&acc);
                let (ece_mean, ece_std) = mean_std(&ece);
                out.push(SummaryRow {
                    strategy: s,
                    cycle: c,
                    acc_mean,
                    acc_std,
                    ece_mean,
                    ece_std,
                    delta_vs_entropy: None,
                    n_runs: group.len(),
                });
            }
        }
        let baseline: Vec<(usize, f64)> = out
            .iter()
            .filter(|r| r.strategy == StrategyId::Entropy)
            .map(|r| (r.cycle, r.acc_mean))
            .collect();
        for r in &mut out {
            r.delta_vs_entropy = baseline
                .iter()
                .find(|(c, _)| *c == r.cycle)
                .map(|(_, m)| r.acc_mean - m);
        }
        Summary { rows: out }
    }

    pub fn get(&self, strategy: StrategyId, cycle: usize) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.strategy == strategy && r.cycle == cycle)
    }

    /// Row for the last cycle recorded for `strategy`.
    pub fn final_row(&self, strategy: StrategyId) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .filter(|r| r.strategy == strategy)
            .max_by_key(|r| r.cycle)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "strategy",
                "cycle",
                "acc_mean",
                "acc_std",
                "ece_mean",
                "ece_std",
                "delta_vs_entropy",
                "n_runs",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fixed-width table, accuracy and ECE in percent.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<9} {:>5} {:>4} {:>16} {:>16} {:>9}",
            "strategy", "cycle", "runs", "accuracy %", "ECE %", "vs entr."
        );
        for r in &self.rows {
            let delta = r
                .delta_vs_entropy
                .map(|d| format!("{:+.2}", 100.0 * d))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "{:<9} {:>5} {:>4} {:>8.2} ± {:<5.2} {:>8.2} ± {:<5.2} {:>9}",
                r.strategy.name(),
                r.cycle,
                r.n_runs,
                100.0 * r.acc_mean,
                100.0 * r.acc_std,
                100.0 * r.ece_mean,
                100.0 * r.ece_std,
                delta
            );
        }
        s
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Reads one `results.csv`, rejecting any header other than the one
/// written by the experiment driver.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(CpealError::validation(format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| CpealError::validation(format!("{}: {e}", path.display()))))
        .collect()
}

/// `dir/results.csv` if present, otherwise every `dir/*/results.csv`.
fn find_results(dir: &Path) -> Result<Vec<PathBuf>> {
    let top = dir.join("results.csv");
    if top.is_file() {
        return Ok(vec![top]);
    }
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let p = entry?.path().join("results.csv");
        if p.is_file() {
            found.push(p);
        }
    }
    found.sort();
    Ok(found)
}

/// Aggregates the results under `dir` and writes `summary.csv` and
/// `summary.txt` next to them.
pub fn aggregate_report(dir: impl AsRef<Path>) -> Result<Summary> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(CpealError::validation(format!("{} is not a directory", dir.display())));
    }
    let files = find_results(dir)?;
    if files.is_empty() {
        return Err(CpealError::validation(format!("no results.csv under {}", dir.display())));
    }
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(read_results(f)?);
    }
    let summary = Summary::from_rows(&rows);
    summary.write_csv(dir.join("summary.csv"))?;
    fs::write(dir.join("summary.txt"), summary.to_table())?;
    Ok(summary)
}
