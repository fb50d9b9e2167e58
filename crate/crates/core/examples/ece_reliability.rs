//! Reliability table of a head trained with and without the calibration
//! term, on the same labeled pool.

use cpeal::datastore::{gen_synthetic, PoolState, SynthSpec};
use cpeal::heads::{init_prompt_head, Head};
use cpeal::metrics::{ece, DEFAULT_ECE_BINS};
use cpeal::selection::{select, StrategyId};
use cpeal::trainer::{train_cycle, TrainConfig};

fn main() -> cpeal::Result<()> {
    let ds = gen_synthetic(&SynthSpec::new(10, 32, 200, 4.0))?;
    let test = ds.test_indices();
    let (x, y) = (ds.gather(&test), ds.gather_labels(&test));

    let head = Head::Prompt(init_prompt_head(10, 32, 4)?);
    let mut pool = PoolState::new(&ds);
    let picks = select(StrategyId::Random, &head, &ds, &pool, 40, 4)?;
    pool.reveal(&picks.indices)?;

    for alpha in [0.0, 1.0] {
        let cfg = TrainConfig {
            alpha_final: alpha,
            ..Default::default()
        };
        let (trained, _) = train_cycle(&head, &ds, &pool, &cfg)?;
        let (_, probs) = trained.forward(&x)?;
        let report = ece(&probs, &y, DEFAULT_ECE_BINS)?;
        println!("alpha = {alpha}: ECE = {:.4}", report.ece);
        println!("  bin  range          count  conf   acc");
        for b in report.bins.iter().filter(|b| b.count > 0) {
            println!(
                "  {:>3}  ({:.3}, {:.3}]  {:>5}  {:.3}  {:.3}",
                b.bin, b.lower, b.upper, b.count, b.mean_confidence, b.mean_accuracy
            );
        }
        let path = std::env::temp_dir().join(format!("cpeal-reliability-alpha{alpha}.csv"));
        report.write_csv(std::fs::File::create(&path)?)?;
        println!("  bins written to {}", path.display());
    }
    Ok(())
}
