//! Selection wall time against pool size. Uncertainty strategies are one
//! pass over the pool; coreset and BADGE compare the pool against every
//! center they pick, so with a budget that grows with the pool they grow
//! quadratically.
//!
//! ```text
//! cargo run --release --example complexity_timing
//! ```

use cpeal::datastore::{gen_synthetic, PoolState, SynthSpec};
use cpeal::heads::{init_prompt_head, Head};
use cpeal::selection::{select, StrategyId};

fn main() -> cpeal::Result<()> {
    let (k, e) = (10, 32);
    let head = Head::Prompt(init_prompt_head(k, e, 0)?);
    let strategies = [StrategyId::Entropy, StrategyId::Margin, StrategyId::Coreset, StrategyId::Badge];
    print!("{:>7} {:>6}", "pool", "budget");
    for s in strategies {
        print!(" {:>10}", s.name());
    }
    println!("   (ms)");
    for per_class in [134, 534, 2134] {
        let ds = gen_synthetic(&SynthSpec {
            test_fraction: 0.25,
            ..SynthSpec::new(k, e, per_class, 4.0)
        })?;
        let pool = PoolState::new(&ds);
        let n = pool.num_unlabeled();
        let budget = n / 100;
        print!("{n:>7} {budget:>6}");
        for s in strategies {
            let sel = select(s, &head, &ds, &pool, budget, 1)?;
            print!(" {:>10.2}", sel.elapsed_ms());
        }
        println!();
    }
    Ok(())
}
