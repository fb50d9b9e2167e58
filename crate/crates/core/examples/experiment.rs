//! A full active-learning experiment: several strategies, several seeds,
//! results aggregated per cycle.
//!
//! ```text
//! cargo run --release --example experiment            # built-in config
//! cargo run --release --example experiment -- my.json # config file
//! ```

use cpeal::alloop::{aggregate_report, run_experiment_with_jobs, ExperimentConfig};
use cpeal::selection::StrategyId;

fn main() -> cpeal::Result<()> {
    let mut cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => {
            let mut cfg = ExperimentConfig {
                strategies: vec![StrategyId::Random, StrategyId::Entropy, StrategyId::Margin, StrategyId::Cpeal],
                ..Default::default()
            };
            cfg.train.alpha_final = 1.0;
            cfg
        }
    };
    let out = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| std::env::temp_dir().join("cpeal-experiment"));
    cfg.output_dir = Some(out.clone());

    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let run = run_experiment_with_jobs(&cfg, jobs)?;
    println!("{}: {} records in {}", run.dataset_name, run.records().count(), out.display());
    let summary = aggregate_report(&out)?;
    print!("{}", summary.to_table());
    Ok(())
}
