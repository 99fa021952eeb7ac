use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augmentation::{AugmentConfig, PretrainConfig};
use crate::error::{Error, Result};
use crate::objectives::{LossWeights, Margins, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Erda,
    ErdaNoDa,
    Seqrun,
    Joint,
    Replay,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Erda,
        Method::ErdaNoDa,
        Method::Seqrun,
        Method::Joint,
        Method::Replay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Erda => "erda",
            Method::ErdaNoDa => "erda_no_da",
            Method::Seqrun => "seqrun",
            Method::Joint => "joint",
            Method::Replay => "replay",
        }
    }

    pub fn uses_augmentation(self) -> bool {
        self == Method::Erda
    }

    pub fn uses_memory(self) -> bool {
        self != Method::Seqrun
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Task sequence layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceConfig {
    pub n_tasks: usize,
    pub n_way: usize,
    pub k_shot: usize,
    /// Training samples per relation in the first task.
    pub base_samples_per_relation: usize,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            n_tasks: 8,
            n_way: 10,
            k_shot: 5,
            base_samples_per_relation: 420,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub embedding_dim: usize,
    pub output_dim: usize,
    pub train_embeddings: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            embedding_dim: 50,
            output_dim: 200,
            train_embeddings: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub seeds: Vec<u64>,
    pub iter1: usize,
    pub iter2: usize,
    /// Passes over the data inside one iteration.
    pub epochs_per_iter: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weights: LossWeights,
    pub margins: Margins,
    pub augment: AugmentConfig,
    pub metric: Metric,
    /// Corrupted copies per memory sample in the contrastive term.
    pub hard_negatives: usize,
    pub encoder: EncoderConfig,
    pub sequence: SequenceConfig,
    pub pretrain: PretrainConfig,
    /// Method used as the reference in significance tests.
    pub baseline: Method,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Erda,
            seeds: (1..=6).collect(),
            iter1: 1,
            iter2: 2,
            epochs_per_iter: 1,
            batch_size: 16,
            learning_rate: 0.1,
            weights: LossWeights::default(),
            margins: Margins::default(),
            augment: AugmentConfig::default(),
            metric: Metric::Cosine,
            hard_negatives: 2,
            encoder: EncoderConfig::default(),
            sequence: SequenceConfig::default(),
            pretrain: PretrainConfig::default(),
            baseline: Method::Seqrun,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("seeds", self.seeds.len()),
            ("iter1", self.iter1),
            ("iter2", self.iter2),
            ("batch_size", self.batch_size),
            ("hard_negatives", self.hard_negatives),
            ("encoder.embedding_dim", self.encoder.embedding_dim),
            ("encoder.output_dim", self.encoder.output_dim),
            ("sequence.n_tasks", self.sequence.n_tasks),
            ("sequence.n_way", self.sequence.n_way),
            ("sequence.k_shot", self.sequence.k_shot),
            (
                "sequence.base_samples_per_relation",
                self.sequence.base_samples_per_relation,
            ),
            ("augment.k", self.augment.k),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.augment.alpha) {
            return Err(Error::Config(format!(
                "augment.alpha must lie in [0, 1), got {}",
                self.augment.alpha
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::Config(format!("seed {dup} listed twice")));
        }
        self.weights.validate()?;
        self.margins.validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}
