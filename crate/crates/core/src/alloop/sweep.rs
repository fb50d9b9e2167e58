//! Grid search over the final calibration weight.

use std::fs;
use std::path::{Path, PathBuf};

use super::{run_experiment_with_jobs, ExperimentConfig, ExperimentRun};
use crate::error::{CpealError, Result};
use crate::selection::StrategyId;

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// `(alpha, mean final-cycle accuracy, run)` in grid order.
    pub per_alpha: Vec<(f64, f64, ExperimentRun)>,
    pub best_alpha: f64,
}

/// Directory name used for one grid point, e.g. `alpha_0.5`.
pub fn alpha_dir_name(alpha: f64) -> String {
    format!("alpha_{alpha}")
}

/// Mean accuracy over seeds at the last cycle. Only cpeal units count when
/// any are present, since alpha does not affect the other strategies.
fn final_accuracy(run: &ExperimentRun) -> f64 {
    let has_cpeal = run.units.iter().any(|u| u.strategy == StrategyId::Cpeal);
    let finals: Vec<f64> = run
        .units
        .iter()
        .filter(|u| !has_cpeal || u.strategy == StrategyId::Cpeal)
        .filter_map(|u| u.records.last().map(|r| r.accuracy))
        .collect();
    finals.iter().sum::<f64>() / finals.len() as f64
}

/// Runs `cfg` once per alpha in `grid`, each into `out/alpha_<a>/`, and
/// writes `out/best_alpha.txt`. Ties go to the smaller alpha.
pub fn run_sweep(cfg: &ExperimentConfig, grid: &[f64], out: impl AsRef<Path>, jobs: usize) -> Result<SweepOutcome> {
    if grid.is_empty() {
        return Err(CpealError::config("alpha grid is empty"));
    }
    if let Some(a) = grid.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(CpealError::config(format!("alpha grid values must be positive, got {a}")));
    }
    cfg.validate()?;
    let out = out.as_ref();
    fs::create_dir_all(out)?;

    let mut per_alpha = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let mut c = cfg.clone();
        c.train.alpha_final = alpha;
        c.output_dir = Some(out.join(alpha_dir_name(alpha)));
        let run = run_experiment_with_jobs(&c, jobs)?;
        per_alpha.push((alpha, final_accuracy(&run), run));
    }
    let (best_alpha, best_acc) = per_alpha
        .iter()
        .map(|(a, acc, _)| (*a, *acc))
        .fold(None::<(f64, f64)>, |best, (a, acc)| match best {
            Some((ba, bacc)) if acc < bacc || (acc == bacc && a >= ba) => Some((ba, bacc)),
            _ => Some((a, acc)),
        })
        .expect("grid is non-empty");

    let mut text = format!("best_alpha={best_alpha}\nfinal_accuracy={best_acc:.6}\n");
    for (a, acc, _) in &per_alpha {
        text.push_str(&format!("alpha={a} final_accuracy={acc:.6}\n"));
    }
    fs::write(out.join("best_alpha.txt"), text)?;
    Ok(SweepOutcome { per_alpha, best_alpha })
}

/// Subdirectories a sweep wrote under `out`, in grid order.
pub fn sweep_dirs(out: &Path, grid: &[f64]) -> Vec<PathBuf> {
    grid.iter().map(|&a| out.join(alpha_dir_name(a))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloop::DatasetSource;
    use crate::datastore::SynthSpec;
    use crate::trainer::TrainConfig;

    #[test]
    fn writes_one_dir_per_alpha_and_the_choice() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            dataset: DatasetSource::Synthetic(SynthSpec::new(2, 4, 12, 4.0)),
            train: TrainConfig {
                epochs: 3,
                ..Default::default()
            },
            strategies: vec![StrategyId::Cpeal],
            cycles: 2,
            seeds: vec![1],
            ..Default::default()
        };
        let out = run_sweep(&cfg, &[0.2, 0.8], dir.path(), 1).unwrap();
        for d in sweep_dirs(dir.path(), &[0.2, 0.8]) {
            assert!(d.join("results.csv").is_file());
        }
        assert!([0.2, 0.8].contains(&out.best_alpha));
        let text = fs::read_to_string(dir.path().join("best_alpha.txt")).unwrap();
        assert!(text.starts_with(&format!("best_alpha={}", out.best_alpha)));
    }

    #[test]
    fn rejects_zero_and_empty_grids() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();
        assert!(matches!(run_sweep(&cfg, &[], dir.path(), 1), Err(CpealError::Config(_))));
        assert!(matches!(run_sweep(&cfg, &[0.0, 0.5], dir.path(), 1), Err(CpealError::Config(_))));
    }
}
