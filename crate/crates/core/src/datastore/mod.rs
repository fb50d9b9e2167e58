//! Embedding datasets and active-learning pool bookkeeping.

mod cpeb;
mod dataset;
mod pool;
mod synth;

pub use cpeb::{load_dataset, read_dataset, save_dataset, write_dataset, CPEB_MAGIC, CPEB_VERSION};
pub use dataset::{EmbeddingDataset, Split};
pub use pool::{reveal_labels, PoolState};
pub use synth::{gen_synthetic, SynthSpec};
