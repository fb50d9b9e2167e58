//! Per-step training log of one calibrated cycle: how the correct and
//! incorrect counts, the weights and both loss terms evolve.

use cpeal::datastore::{gen_synthetic, PoolState, SynthSpec};
use cpeal::heads::{init_prompt_head, Head};
use cpeal::selection::{select, StrategyId};
use cpeal::trainer::{lr_schedule, train_cycle, TrainConfig};

fn main() -> cpeal::Result<()> {
    let ds = gen_synthetic(&SynthSpec::new(10, 32, 200, 4.0))?;
    let head = Head::Prompt(init_prompt_head(10, 32, 2)?);
    let mut pool = PoolState::new(&ds);
    let picks = select(StrategyId::Random, &head, &ds, &pool, 50, 2)?;
    pool.reveal(&picks.indices)?;

    let cfg = TrainConfig {
        epochs: 60,
        alpha_final: 1.0,
        anneal: true,
        ..Default::default()
    };
    let (_, log) = train_cycle(&head, &ds, &pool, &cfg)?;
    println!("epoch  lr        alpha  correct  incorrect  gamma  beta   CE      calib");
    for s in log.steps.iter().filter(|s| s.iter == 0 && s.epoch % 5 == 0) {
        println!(
            "{:>5}  {:.2e}  {:.3}  {:>7}  {:>9}  {:.2}   {:.2}   {:.4}  {:.4}",
            s.epoch, s.lr, s.alpha, s.n_correct, s.n_incorrect, s.gamma, s.beta, s.loss_ce, s.loss_calib
        );
    }
    println!("last epoch lr = {:.1e}", lr_schedule(cfg.epochs - 1, &cfg)?);

    let path = std::env::temp_dir().join("cpeal-train-log.csv");
    log.write_csv(std::fs::File::create(&path)?)?;
    println!("{} steps written to {}", log.steps.len(), path.display());
    Ok(())
}
