//! Prompt head against LoRA head: trainable sizes, the zero-shot analog
//! before any labels, and one training cycle on a small labeled pool.

use cpeal::datastore::{gen_synthetic, PoolState, SynthSpec};
use cpeal::heads::{init_prompt_head, load_head, save_head, seed_class_projection, Head, LoraHead};
use cpeal::metrics::accuracy;
use cpeal::trainer::{train_cycle, TrainConfig};

fn test_accuracy(head: &Head, x: &ndarray::Array2<f64>, y: &[usize]) -> cpeal::Result<f64> {
    let (_, probs) = head.forward(x)?;
    accuracy(&probs.predictions(), y)
}

fn main() -> cpeal::Result<()> {
    let ds = gen_synthetic(&SynthSpec::new(10, 32, 100, 4.0))?;
    let test = ds.test_indices();
    let (x_test, y_test) = (ds.gather(&test), ds.gather_labels(&test));

    // Five labeled rows per class.
    let mut pool = PoolState::new(&ds);
    let mut picks = Vec::new();
    for c in 0..ds.num_classes() {
        picks.extend(ds.train_indices().into_iter().filter(|&i| ds.labels[i] as usize == c).take(5));
    }
    pool.reveal(&picks)?;

    // The LoRA factors start near zero (B = 0, A small), so they need a
    // larger step than the prompt context to move in 100 epochs.
    let w = seed_class_projection(&ds, 1, 3);
    let heads = [
        ("prompt", Head::Prompt(init_prompt_head(10, 32, 3)?), 0.002),
        ("lora r=2", Head::Lora(LoraHead::new(w.clone(), 2, 1.0, 3)?), 0.2),
    ];
    for (name, head, base_lr) in heads {
        let cfg = TrainConfig {
            epochs: 100,
            alpha_final: 1.0,
            base_lr,
            ..Default::default()
        };
        let before = test_accuracy(&head, &x_test, &y_test)?;
        let (trained, log) = train_cycle(&head, &ds, &pool, &cfg)?;
        let after = test_accuracy(&trained, &x_test, &y_test)?;
        println!(
            "{name:9} {:5} trainable params, lr {base_lr}, zero-shot acc {:.3}, after {} steps {:.3}",
            head.trainable_params(),
            before,
            log.steps.len(),
            after
        );
    }

    // At init the LoRA delta is exactly zero.
    let lora = Head::Lora(LoraHead::new(w.clone(), 4, 1.0, 9)?);
    assert_eq!(lora.logits(&x_test)?, x_test.dot(&w));

    let path = std::env::temp_dir().join("cpeal-lora.cphd");
    save_head(&lora, &path)?;
    assert_eq!(load_head(&path)?, lora);
    println!("checkpoint round trip ok: {}", path.display());
    Ok(())
}
