use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datastore::{gen_synthetic, load_dataset, EmbeddingDataset, SynthSpec};
use crate::error::{CpealError, Result};
use crate::heads::{ContextPooling, DEFAULT_CONTEXT_LEN, DEFAULT_LOGIT_SCALE};
use crate::metrics::DEFAULT_ECE_BINS;
use crate::selection::StrategyId;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    /// CPEB file. Relative paths in a config file resolve against the
    /// config file's directory.
    Path(PathBuf),
    Synthetic(SynthSpec),
}

impl DatasetSource {
    pub fn load(&self) -> Result<EmbeddingDataset> {
        match self {
            DatasetSource::Path(p) => load_dataset(p),
            DatasetSource::Synthetic(spec) => gen_synthetic(spec),
        }
    }
}

/// Where the frozen LoRA projection comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionInit {
    /// Column k = one randomly chosen train embedding of class k.
    #[default]
    ClassSeed,
    Orthonormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HeadConfig {
    Prompt {
        #[serde(default = "default_context_len")]
        context_len: usize,
        #[serde(default = "default_logit_scale")]
        logit_scale: f64,
        #[serde(default)]
        pooling: ContextPooling,
    },
    Lora {
        #[serde(default = "default_rank")]
        rank: usize,
        #[serde(default = "default_lora_scale")]
        lora_scale: f64,
        #[serde(default)]
        projection: ProjectionInit,
    },
}

fn default_context_len() -> usize {
    DEFAULT_CONTEXT_LEN
}
fn default_logit_scale() -> f64 {
    DEFAULT_LOGIT_SCALE
}
fn default_rank() -> usize {
    2
}
fn default_lora_scale() -> f64 {
    1.0
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig::Prompt {
            context_len: DEFAULT_CONTEXT_LEN,
            logit_scale: DEFAULT_LOGIT_SCALE,
            pooling: ContextPooling::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub head: HeadConfig,
    pub train: TrainConfig,
    pub strategies: Vec<StrategyId>,
    pub cycles: usize,
    pub seeds: Vec<u64>,
    /// Samples acquired per cycle; `None` means one per class.
    pub budget_per_cycle: Option<usize>,
    /// Size of a random labeled seed set drawn before cycle 1.
    pub initial_labeled: usize,
    pub ece_bins: usize,
    pub output_dir: Option<PathBuf>,
    /// Also write one per-step training log CSV per (seed, strategy).
    pub save_train_logs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Synthetic(SynthSpec {
                num_classes: 10,
                dim: 32,
                per_class: 200,
                class_separation: 4.0,
                within_class_scale: 1.0,
                test_fraction: 0.25,
                seed: 0,
            }),
            head: HeadConfig::default(),
            train: TrainConfig::default(),
            strategies: vec![StrategyId::Random, StrategyId::Entropy, StrategyId::Cpeal],
            cycles: 8,
            seeds: vec![1, 2, 3],
            budget_per_cycle: None,
            initial_labeled: 0,
            ece_bins: DEFAULT_ECE_BINS,
            output_dir: None,
            save_train_logs: false,
        }
    }
}

impl ExperimentConfig {
    /// Structural checks that do not need the dataset.
    pub fn validate(&self) -> Result<()> {
        if self.cycles == 0 {
            return Err(CpealError::config("cycles must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(CpealError::config("seeds must not be empty"));
        }
        if self.strategies.is_empty() {
            return Err(CpealError::validation("strategy list is empty"));
        }
        if self.budget_per_cycle == Some(0) {
            return Err(CpealError::config("budget_per_cycle must be at least 1"));
        }
        if self.ece_bins == 0 {
            return Err(CpealError::config("ece_bins must be at least 1"));
        }
        match &self.head {
            HeadConfig::Prompt {
                context_len,
                logit_scale,
                ..
            } => {
                if *context_len == 0 || !(*logit_scale > 0.0) {
                    return Err(CpealError::config("prompt head needs context_len >= 1 and logit_scale > 0"));
                }
            }
            HeadConfig::Lora { rank, lora_scale, .. } => {
                if *rank == 0 || !(*lora_scale > 0.0) {
                    return Err(CpealError::config("LoRA head needs rank >= 1 and lora_scale > 0"));
                }
            }
        }
        self.train
            .validate()
            .map_err(|e| CpealError::config(format!("train: {e}")))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CpealError::config(format!("config: {e}")))
    }

    /// Parses a JSON config file; a relative dataset path is resolved
    /// against the file's directory.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            CpealError::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CpealError::config(format!("{}: {e}", path.display())))?;
        if let DatasetSource::Path(p) = &mut cfg.dataset {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_json_str(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.cycles, 8);
        assert_eq!(cfg.seeds.len(), 3);
    }

    #[test]
    fn partial_config_takes_defaults() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{"strategies": ["entropy", "badge"], "head": {"kind": "lora", "rank": 4}, "train": {"epochs": 10}}"#,
        )
        .unwrap();
        assert_eq!(cfg.strategies, vec![StrategyId::Entropy, StrategyId::Badge]);
        assert_eq!(
            cfg.head,
            HeadConfig::Lora {
                rank: 4,
                lora_scale: 1.0,
                projection: ProjectionInit::ClassSeed
            }
        );
        assert_eq!(cfg.train.epochs, 10);
        assert_eq!(cfg.train.base_lr, 0.002);
    }

    #[test]
    fn errors_name_the_field_and_line() {
        let err = ExperimentConfig::from_json_str("{\n  \"cycels\": 3\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("cycels") && msg.contains("line 2"), "{msg}");
        let err = ExperimentConfig::from_json_str(r#"{"strategies": ["bald"]}"#).unwrap_err();
        assert!(err.to_string().contains("bald"));
    }

    #[test]
    fn validation_catches_empty_lists() {
        let cfg = ExperimentConfig {
            strategies: vec![],
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(CpealError::Validation(_))));
        let cfg = ExperimentConfig {
            seeds: vec![],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
