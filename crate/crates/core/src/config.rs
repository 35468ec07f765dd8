//! Configuration for every stage, serializable as one JSON document.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Direction;
use crate::edit::OperatorKind;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub emb_dim: usize,
    /// Hidden size per direction.
    pub hidden: usize,
    /// Width of the additive attention layer.
    pub attn_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            emb_dim: 128,
            hidden: 256,
            attn_dim: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub emb_dim: usize,
    pub hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without dev-perplexity improvement before stopping.
    pub patience: usize,
    pub clip: f64,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            emb_dim: 128,
            hidden: 256,
            lr: 3e-3,
            batch_size: 32,
            max_epochs: 10,
            patience: 2,
            clip: 5.0,
            seed: 11,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Pretraining stops once clean dev accuracy reaches this value.
    pub target_dev_acc: f64,
    /// Per-token replacement probability for the termination classifier.
    pub unk_noise_rate: f64,
    pub clip: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            lr: 2e-3,
            batch_size: 32,
            max_epochs: 10,
            target_dev_acc: 0.95,
            unk_noise_rate: 0.2,
            clip: 5.0,
            seed: 13,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalClassifierConfig {
    pub emb_dim: usize,
    /// Feature maps per convolution width.
    pub filters: usize,
    pub widths: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub target_dev_acc: f64,
    pub seed: u64,
}

impl Default for EvalClassifierConfig {
    fn default() -> Self {
        EvalClassifierConfig {
            emb_dim: 64,
            filters: 32,
            widths: vec![3, 4, 5],
            lr: 2e-3,
            batch_size: 32,
            max_epochs: 10,
            target_dev_acc: 0.99,
            seed: 17,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda_lm: f64,
    pub lambda_conf: f64,
    pub lambda_rec: f64,
    pub pointer_lr: f64,
    pub generator_lr: f64,
    /// Number of episodes.
    pub iterations: u64,
    pub seed: u64,
    pub operators_allowed: Vec<OperatorKind>,
    pub disable_reconstruction: bool,
    /// Subtract an exponential moving average of past rewards.
    pub baseline_enabled: bool,
    pub baseline_decay: f64,
    /// Episodes per optimizer step.
    pub accumulate: usize,
    /// Write a checkpoint every this many episodes (0 disables).
    pub checkpoint_every: u64,
    pub clip: f64,
    /// Keep optimizing the classification loss during the episode loop.
    pub joint_classification: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_lm: 0.5,
            lambda_conf: 1.0,
            lambda_rec: 0.5,
            pointer_lr: 1e-3,
            generator_lr: 3e-3,
            iterations: 20_000,
            seed: 23,
            operators_allowed: OperatorKind::ALL.to_vec(),
            disable_reconstruction: false,
            baseline_enabled: false,
            baseline_decay: 0.99,
            accumulate: 16,
            checkpoint_every: 0,
            clip: 5.0,
            joint_classification: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_lm", self.lambda_lm),
            ("lambda_conf", self.lambda_conf),
            ("lambda_rec", self.lambda_rec),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        if self.operators_allowed.is_empty() {
            return Err(Error::Config("operators_allowed must not be empty".into()));
        }
        if self.accumulate == 0 {
            return Err(Error::Config("accumulate must be at least 1".into()));
        }
        if !(self.pointer_lr > 0.0 && self.generator_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(Error::Config("baseline_decay must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceConfig {
    /// Editing continues while the source-style confidence exceeds this.
    pub p_stop: f64,
    pub j_max: usize,
    /// Exponent on the target-style probability in the selection criterion.
    pub eta: f64,
    pub direction: Direction,
    /// Positions masked on each side of an inserted, replaced or skipped word.
    pub window: usize,
    pub operators_allowed: Vec<OperatorKind>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            p_stop: 0.5,
            j_max: 6,
            eta: 1.0,
            direction: Direction::S1ToS2,
            window: 1,
            operators_allowed: OperatorKind::ALL.to_vec(),
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_stop) {
            return Err(Error::Config(format!("p_stop must lie in [0, 1], got {}", self.p_stop)));
        }
        if self.j_max == 0 {
            return Err(Error::Config("j_max must be positive".into()));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be nonnegative, got {}", self.eta)));
        }
        if !self.operators_allowed.contains(&OperatorKind::Skip) {
            return Err(Error::Config("inference operators must include Skip".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub encoder: EncoderConfig,
    pub lm: LmConfig,
    pub classifier: ClassifierConfig,
    pub eval_classifier: EvalClassifierConfig,
    pub train: TrainConfig,
    pub inference: InferenceConfig,
    pub min_freq: usize,
}

impl Config {
    /// Small dimensions for desk-scale synthetic runs.
    pub fn compact() -> Self {
        Config {
            encoder: EncoderConfig {
                emb_dim: 24,
                hidden: 32,
                attn_dim: 24,
            },
            lm: LmConfig {
                emb_dim: 24,
                hidden: 48,
                lr: 1e-2,
                max_epochs: 10,
                ..LmConfig::default()
            },
            classifier: ClassifierConfig {
                lr: 5e-3,
                ..ClassifierConfig::default()
            },
            eval_classifier: EvalClassifierConfig {
                emb_dim: 16,
                filters: 12,
                lr: 5e-3,
                ..EvalClassifierConfig::default()
            },
            train: TrainConfig {
                iterations: 12_000,
                pointer_lr: 3e-3,
                generator_lr: 1e-2,
                ..TrainConfig::default()
            },
            inference: InferenceConfig::default(),
            min_freq: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.inference.validate()?;
        if self.eval_classifier.widths.is_empty() {
            return Err(Error::Config("eval_classifier.widths must not be empty".into()));
        }
        let dims = [
            self.encoder.emb_dim,
            self.encoder.hidden,
            self.encoder.attn_dim,
            self.lm.emb_dim,
            self.lm.hidden,
            self.eval_classifier.emb_dim,
            self.eval_classifier.filters,
        ];
        if dims.contains(&0) {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: Config = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        for cfg in [Config::default(), Config::compact()] {
            cfg.validate().unwrap();
            let back: Config = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg: Config =
            serde_json::from_str(r#"{"train": {"operators_allowed": ["Rep"], "lambda_rec": 0.0}}"#).unwrap();
        assert_eq!(cfg.train.operators_allowed, vec![OperatorKind::Rep]);
        assert_eq!(cfg.train.lambda_conf, 1.0);
        assert_eq!(cfg.encoder, EncoderConfig::default());
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = Config::default();
        cfg.train.operators_allowed.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = Config::default();
        cfg.train.lambda_lm = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = Config::default();
        cfg.inference.p_stop = 1.5;
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<Config>(r#"{"bogus": 1}"#).is_err());
    }
}
