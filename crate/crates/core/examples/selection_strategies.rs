//! Every acquisition strategy on the same pool after one trained cycle.

use cpeal::datastore::{gen_synthetic, PoolState, SynthSpec};
use cpeal::heads::{init_prompt_head, Head};
use cpeal::selection::{select, StrategyId};
use cpeal::trainer::{train_cycle, TrainConfig};

fn main() -> cpeal::Result<()> {
    let ds = gen_synthetic(&SynthSpec::new(5, 16, 80, 3.0))?;
    let mut pool = PoolState::new(&ds);
    let first = select(StrategyId::Random, &Head::Prompt(init_prompt_head(5, 16, 0)?), &ds, &pool, 10, 0)?;
    pool.reveal(&first.indices)?;
    pool.cycle = 1;

    let head = Head::Prompt(init_prompt_head(5, 16, 1)?);
    let cfg = TrainConfig {
        epochs: 50,
        ..Default::default()
    };
    let (head, _) = train_cycle(&head, &ds, &pool, &cfg)?;

    println!("{} labeled, {} unlabeled", pool.num_labeled(), pool.num_unlabeled());
    for s in StrategyId::ALL {
        let sel = select(s, &head, &ds, &pool, 5, 42)?;
        let classes: Vec<u32> = sel.indices.iter().map(|&i| ds.labels[i]).collect();
        println!(
            "{:8} {:?} picks {:?} true classes {:?} ({:.3} ms)",
            s.name(),
            s.cost_class(),
            sel.indices,
            classes,
            sel.elapsed_ms()
        );
    }
    Ok(())
}
