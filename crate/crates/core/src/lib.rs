//! Calibrated parameter-efficient active learning over precomputed embeddings.
//!
//! The crate trains small classification heads (a prompt-prototype head and a
//! low-rank adapter head) on top of frozen feature vectors, adds an
//! entropy-calibration term to the cross-entropy objective, and drives a
//! pool-based active-learning loop that compares calibrated entropy selection
//! against the usual baselines (random, entropy, least-confidence, margin,
//! k-center coreset and BADGE).
//!
//! Module map:
//!
//! - [`datastore`]: embedding datasets, the CPEB binary format, the synthetic
//!   generator and labeled/unlabeled pool bookkeeping.
//! - [`heads`]: [`heads::PromptHead`] and [`heads::LoraHead`], softmax and
//!   parameter gradients.
//! - [`calibration`]: entropy, correct/incorrect partition, the calibration
//!   losses and their analytic gradient with respect to the logits.
//! - [`trainer`]: mini-batch SGD with warmup + cosine learning rate.
//! - [`selection`]: acquisition strategies and class-balanced top-B.
//! - [`metrics`]: accuracy and expected calibration error.
//! - [`alloop`]: the multi-seed, multi-cycle experiment driver and reports.
//! - [`cli`]: the `cpeal` command line (`gen-synth`, `run`, `sweep`, `report`).
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod alloop;
pub mod calibration;
pub mod cli;
pub mod datastore;
pub mod error;
pub mod heads;
pub mod metrics;
pub mod rng;
pub mod selection;
pub mod trainer;

pub use error::{CpealError, Result};
