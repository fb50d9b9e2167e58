//! Command-line front end: `gen-synth`, `run`, `sweep`, `report`.
//!
//! Exit status is 0 on success, 2 for usage and configuration problems and 1
//! for failures while running.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::alloop::{aggregate_report, run_experiment_with_jobs, run_sweep, ExperimentConfig};
use crate::datastore::{gen_synthetic, save_dataset, SynthSpec};
use crate::error::{CpealError, Result};

#[derive(Debug, Parser)]
#[command(name = "cpeal", version, about = "Calibrated parameter-efficient active learning on embedding datasets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic Gaussian-cluster dataset as a CPEB file.
    GenSynth(GenSynthArgs),
    /// Run an experiment from a JSON config.
    Run(RunArgs),
    /// Run an experiment once per calibration weight and pick the best.
    Sweep(SweepArgs),
    /// Summarize results.csv files into summary.csv and summary.txt.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    #[arg(long)]
    pub classes: usize,
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub per_class: usize,
    #[arg(long, default_value_t = 4.0)]
    pub sep: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0.25)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, required_unless_present = "print_default_config")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing results.
    #[arg(long)]
    pub force: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Print the built-in default config as JSON and exit.
    #[arg(long)]
    pub print_default_config: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated calibration weights, e.g. 0.1,0.5,1.0.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub alpha_grid: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding results.csv, or per-alpha subdirectories of one.
    #[arg(long)]
    pub results: PathBuf,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cpeal: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

pub fn main() -> ExitCode {
    run_from(std::env::args_os())
}

pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenSynth(a) => gen_synth(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    }
}

fn gen_synth(a: GenSynthArgs) -> Result<()> {
    let spec = SynthSpec {
        num_classes: a.classes,
        dim: a.dim,
        per_class: a.per_class,
        class_separation: a.sep,
        within_class_scale: a.scale,
        test_fraction: a.test_fraction,
        seed: a.seed,
    };
    let ds = gen_synthetic(&spec)?;
    save_dataset(&ds, &a.out)?;
    println!(
        "wrote {}: n={} E={} K={} train={} test={}",
        a.out.display(),
        ds.len(),
        ds.dim(),
        ds.num_classes(),
        ds.train_indices().len(),
        ds.test_indices().len()
    );
    Ok(())
}

fn resolve_out(cfg: &ExperimentConfig, out: Option<PathBuf>) -> Result<PathBuf> {
    out.or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CpealError::config("no output directory (use --out or output_dir)"))
}

fn guard_existing(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(CpealError::config(format!(
            "{} already exists (use --force to overwrite)",
            path.display()
        )));
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    if a.print_default_config {
        println!("{}", ExperimentConfig::default().to_json_pretty());
        return Ok(());
    }
    let path = a.config.expect("clap enforces --config");
    let mut cfg = ExperimentConfig::from_json_file(&path)?;
    let out = resolve_out(&cfg, a.out)?;
    guard_existing(&out.join("results.csv"), a.force)?;
    cfg.output_dir = Some(out.clone());
    let run = run_experiment_with_jobs(&cfg, a.jobs)?;
    let summary = aggregate_report(&out)?;
    println!(
        "{}: {} records, budget {} per cycle, results in {}",
        run.dataset_name,
        run.records().count(),
        run.budget,
        out.display()
    );
    print!("{}", summary.to_table());
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_json_file(&a.config)?;
    let out = resolve_out(&cfg, a.out)?;
    guard_existing(&out.join("best_alpha.txt"), a.force)?;
    let outcome = run_sweep(&cfg, &a.alpha_grid, &out, a.jobs)?;
    for (alpha, acc, _) in &outcome.per_alpha {
        println!("alpha={alpha} final_accuracy={:.4}", acc);
    }
    println!("best_alpha={}", outcome.best_alpha);
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let summary = aggregate_report(&a.results)?;
    print!("{}", summary.to_table());
    Ok(())
}
