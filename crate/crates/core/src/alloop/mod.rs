//! The active-learning loop and experiment driver.
//!
//! Each `(seed, strategy)` unit runs `cycles` rounds of: fresh head, train on
//! the labeled pool, select `budget` rows, reveal them, evaluate on the test
//! split. Units are independent and may run in parallel; results are emitted
//! in config order regardless of scheduling.

mod config;
mod report;
mod sweep;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{DatasetSource, ExperimentConfig, HeadConfig, ProjectionInit};
pub use report::{aggregate_report, read_results, Summary, SummaryRow};
pub use sweep::{alpha_dir_name, run_sweep, sweep_dirs, SweepOutcome};

use crate::datastore::{EmbeddingDataset, PoolState, Split};
use crate::error::{CpealError, Result};
use crate::heads::{random_orthonormal_projection, seed_class_projection, Head, LoraHead, PromptHead};
use crate::metrics::{accuracy, ece};
use crate::rng::{mix_seed, rng_from_seed};
use crate::selection::{select, StrategyId};
use crate::trainer::{train_cycle, TrainConfig, TrainLog};

/// One evaluated cycle of one `(seed, strategy)` unit.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub seed: u64,
    pub cycle: usize,
    pub strategy: StrategyId,
    /// Labeled-pool size after this cycle's acquisition.
    pub n_labeled: usize,
    pub accuracy: f64,
    pub ece: f64,
    pub selection_time_ms: f64,
    pub train_time_ms: f64,
    pub selected: Vec<usize>,
}

/// A row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub cycle: usize,
    pub strategy: StrategyId,
    pub n_labeled: usize,
    pub accuracy: f64,
    pub ece: f64,
    pub selection_time_ms: f64,
    pub train_time_ms: f64,
}

pub const RESULTS_HEADER: [&str; 8] = [
    "seed",
    "cycle",
    "strategy",
    "n_labeled",
    "accuracy",
    "ece",
    "selection_time_ms",
    "train_time_ms",
];

impl From<&CycleRecord> for ResultRow {
    fn from(r: &CycleRecord) -> Self {
        ResultRow {
            seed: r.seed,
            cycle: r.cycle,
            strategy: r.strategy,
            n_labeled: r.n_labeled,
            accuracy: r.accuracy,
            ece: r.ece,
            selection_time_ms: r.selection_time_ms,
            train_time_ms: r.train_time_ms,
        }
    }
}

/// Output of one `(seed, strategy)` unit.
#[derive(Debug, Clone)]
pub struct UnitRun {
    pub seed: u64,
    pub strategy: StrategyId,
    pub records: Vec<CycleRecord>,
    /// Per-cycle training logs, concatenated.
    pub train_log: TrainLog,
}

/// Everything a finished experiment produced, in config order.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub dataset_name: String,
    pub budget: usize,
    pub units: Vec<UnitRun>,
}

impl ExperimentRun {
    pub fn records(&self) -> impl Iterator<Item = &CycleRecord> {
        self.units.iter().flat_map(|u| u.records.iter())
    }

    pub fn write_results_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(BufWriter::new(File::create(path)?));
        w.write_record(RESULTS_HEADER)?;
        for r in self.records() {
            w.serialize(ResultRow::from(r))?;
        }
        w.flush()?;
        Ok(())
    }

    /// `seed,cycle,strategy,rank,index` with one line per acquired row.
    pub fn write_selections_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(["seed", "cycle", "strategy", "rank", "index"])?;
        for r in self.records() {
            for (rank, idx) in r.selected.iter().enumerate() {
                w.write_record([
                    r.seed.to_string(),
                    r.cycle.to_string(),
                    r.strategy.to_string(),
                    rank.to_string(),
                    idx.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `results.csv`, `selections.csv` and, if requested, one
    /// `train_log_<seed>_<strategy>.csv` per unit.
    pub fn write_outputs(&self, dir: impl AsRef<Path>, train_logs: bool) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        self.write_results_csv(dir.join("results.csv"))?;
        self.write_selections_csv(dir.join("selections.csv"))?;
        if train_logs {
            for u in &self.units {
                let name = format!("train_log_{}_{}.csv", u.seed, u.strategy);
                u.train_log
                    .write_csv(BufWriter::new(File::create(dir.join(name))?))?;
            }
        }
        Ok(())
    }
}

/// Runs the experiment on one thread. See [`run_experiment_with_jobs`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    run_experiment_with_jobs(cfg, 1)
}

/// Loads the dataset, checks the budget can be met, and runs every
/// `(seed, strategy)` unit on up to `jobs` threads. Writes outputs when
/// `cfg.output_dir` is set.
pub fn run_experiment_with_jobs(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentRun> {
    cfg.validate()?;
    let ds = cfg.dataset.load()?;
    let run = run_on_dataset(cfg, &ds, jobs)?;
    if let Some(dir) = &cfg.output_dir {
        run.write_outputs(dir, cfg.save_train_logs)?;
    }
    Ok(run)
}

/// Same as [`run_experiment_with_jobs`] for an already loaded dataset; never
/// writes files.
pub fn run_on_dataset(cfg: &ExperimentConfig, ds: &EmbeddingDataset, jobs: usize) -> Result<ExperimentRun> {
    cfg.validate()?;
    ds.validate()?;
    let budget = cfg.budget_per_cycle.unwrap_or(ds.num_classes());
    let n_train = ds.train_indices().len();
    let needed = cfg.initial_labeled + cfg.cycles * budget;
    if needed > n_train {
        return Err(CpealError::config(format!(
            "{} initial + {} cycles x {} per cycle = {needed} labels, but the train split has {n_train} rows",
            cfg.initial_labeled, cfg.cycles, budget
        )));
    }
    if ds.test_indices().is_empty() {
        return Err(CpealError::config("dataset has no test rows to evaluate on"));
    }

    let units: Vec<(u64, StrategyId)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.strategies.iter().map(move |&st| (s, st)))
        .collect();
    let test = ds.test_indices();
    let eval = Eval {
        x: ds.gather(&test),
        y: ds.gather_labels(&test),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CpealError::config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<UnitRun>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(seed, strategy)| run_unit(cfg, ds, &eval, budget, seed, strategy))
            .collect()
    });
    Ok(ExperimentRun {
        dataset_name: ds.name.clone(),
        budget,
        units: results.into_iter().collect::<Result<_>>()?,
    })
}

struct Eval {
    x: Array2<f64>,
    y: Vec<usize>,
}

/// Head whose frozen part is fixed for a whole `(seed, strategy)` unit and
/// whose trainable part is redrawn every cycle.
#[derive(Debug, Clone)]
pub struct HeadFactory {
    template: Head,
}

impl HeadFactory {
    /// Draws the frozen tensors for run `seed`: class tokens for a prompt
    /// head, the projection `W` for a LoRA head.
    pub fn new(cfg: &HeadConfig, ds: &EmbeddingDataset, seed: u64) -> Result<Self> {
        let template = match cfg {
            HeadConfig::Prompt {
                context_len,
                logit_scale,
                pooling,
            } => Head::Prompt(
                PromptHead::new(ds.num_classes(), ds.dim(), *context_len, *logit_scale, seed)?
                    .with_pooling(*pooling),
            ),
            HeadConfig::Lora {
                rank,
                lora_scale,
                projection,
            } => {
                let w = match projection {
                    ProjectionInit::ClassSeed => seed_class_projection(ds, 1, seed),
                    ProjectionInit::Orthonormal => {
                        random_orthonormal_projection(ds.dim(), ds.num_classes(), seed)
                    }
                };
                Head::Lora(LoraHead::new(w, *rank, *lora_scale, seed)?)
            }
        };
        Ok(HeadFactory { template })
    }

    /// A head with the shared frozen tensors and trainable tensors drawn
    /// from `head_seed`.
    pub fn fresh(&self, head_seed: u64) -> Result<Head> {
        Ok(match &self.template {
            Head::Prompt(p) => Head::Prompt(p.with_fresh_context(head_seed)),
            Head::Lora(l) => Head::Lora(LoraHead::new(l.frozen().clone(), l.rank(), l.scale(), head_seed)?),
        })
    }
}

fn run_unit(
    cfg: &ExperimentConfig,
    ds: &EmbeddingDataset,
    eval: &Eval,
    budget: usize,
    seed: u64,
    strategy: StrategyId,
) -> Result<UnitRun> {
    let mut pool = PoolState::new(ds);
    if cfg.initial_labeled > 0 {
        let unlabeled = pool.unlabeled();
        let mut rng = rng_from_seed(mix_seed(&[seed, 0x1417]));
        let init: Vec<usize> = rand::seq::index::sample(&mut rng, unlabeled.len(), cfg.initial_labeled)
            .into_iter()
            .map(|p| unlabeled[p])
            .collect();
        pool.reveal(&init)?;
    }
    let heads = HeadFactory::new(&cfg.head, ds, seed)?;
    let train_cfg = TrainConfig {
        alpha_final: if strategy.trains_with_calibration() {
            cfg.train.alpha_final
        } else {
            0.0
        },
        ..cfg.train.clone()
    };

    let mut records = Vec::with_capacity(cfg.cycles);
    let mut train_log = TrainLog::default();
    for t in 1..=cfg.cycles {
        let before = pool.num_labeled();
        pool.cycle = t - 1;
        let head_seed = mix_seed(&[seed, t as u64]);
        let head = heads.fresh(head_seed)?;

        let start = Instant::now();
        let (trained, log) = train_cycle(
            &head,
            ds,
            &pool,
            &TrainConfig {
                seed: head_seed,
                ..train_cfg.clone()
            },
        )?;
        let train_time_ms = start.elapsed().as_secs_f64() * 1e3;
        train_log.steps.extend(log.steps);

        let sel = select(strategy, &trained, ds, &pool, budget, mix_seed(&[seed, t as u64, 0x5E1]))?;
        if let Some(&i) = sel.indices.iter().find(|&&i| ds.splits[i] != Split::Train) {
            return Err(CpealError::selection(format!("{strategy} selected non-train row {i}")));
        }
        pool.reveal(&sel.indices)?;
        pool.cycle = t;
        if pool.num_labeled() != before + budget {
            return Err(CpealError::selection(format!(
                "labeled pool grew by {} instead of {budget}",
                pool.num_labeled() - before
            )));
        }

        let (_, probs) = trained.forward(&eval.x)?;
        records.push(CycleRecord {
            seed,
            cycle: t,
            strategy,
            n_labeled: pool.num_labeled(),
            accuracy: accuracy(&probs.predictions(), &eval.y)?,
            ece: ece(&probs, &eval.y, cfg.ece_bins)?.ece,
            selection_time_ms: sel.elapsed_ms(),
            train_time_ms,
            selected: sel.indices,
        });
    }
    Ok(UnitRun {
        seed,
        strategy,
        records,
        train_log,
    })
}
