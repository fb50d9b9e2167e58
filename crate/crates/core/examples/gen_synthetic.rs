//! Generate a synthetic embedding dataset, write it as CPEB and read it back.
//!
//! ```text
//! cargo run --example gen_synthetic -- /tmp/synth.cpeb
//! ```

use cpeal::datastore::{gen_synthetic, load_dataset, save_dataset, SynthSpec};

fn main() -> cpeal::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("cpeal-synth.cpeb"));

    let spec = SynthSpec {
        num_classes: 10,
        dim: 32,
        per_class: 200,
        class_separation: 4.0,
        within_class_scale: 1.0,
        test_fraction: 0.25,
        seed: 7,
    };
    let ds = gen_synthetic(&spec)?;
    save_dataset(&ds, &path)?;
    let back = load_dataset(&path)?;
    assert_eq!(back, ds);

    println!("{} -> {}", ds.name, path.display());
    println!(
        "{} rows, E = {}, K = {} ({} train / {} test)",
        ds.len(),
        ds.dim(),
        ds.num_classes(),
        ds.train_indices().len(),
        ds.test_indices().len()
    );
    for c in 0..ds.num_classes() {
        let n = ds.labels.iter().filter(|&&y| y as usize == c).count();
        print!("{}={n} ", ds.class_names[c]);
    }
    println!();
    Ok(())
}
