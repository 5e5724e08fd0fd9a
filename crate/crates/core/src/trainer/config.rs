use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gcl::GclConfig;
use crate::model::HeadKind;
use crate::numerics::rng::fnv1a64;
use crate::sampler::SamplerSpec;

/// Training objective and the head it implies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Plain cross-entropy on a linear head with bias.
    Ce,
    /// GCL loss on a cosine head.
    Gcl,
}

impl Method {
    pub fn head_kind(self) -> HeadKind {
        match self {
            Method::Ce => HeadKind::Linear,
            Method::Gcl => HeadKind::Cosine,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ce => "ce",
            Method::Gcl => "gcl",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" => Ok(Method::Ce),
            "gcl" => Ok(Method::Gcl),
            _ => Err(Error::Config(format!("unknown method `{s}` (expected ce or gcl)"))),
        }
    }
}

/// Shot-count buckets for reporting, keyed by TRAINING counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupThresholds {
    /// Classes with more than this many training samples are "many".
    pub many_above: usize,
    /// Classes with fewer than this many training samples are "few".
    pub few_below: usize,
}

impl Default for GroupThresholds {
    fn default() -> Self {
        GroupThresholds {
            many_above: 100,
            few_below: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    /// Run classifier re-training after representation learning.
    pub retrain: bool,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Learning-rate milestones as fractions of each stage's length.
    pub milestones: Vec<f64>,
    /// Multiplier applied at every milestone passed.
    pub lr_decay: f64,
    /// Beta parameter for mixup in stage 1; `None` disables mixup.
    pub mixup_alpha: Option<f64>,
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub seed: u64,
    pub sampler: SamplerSpec,
    pub gcl: GclConfig,
    pub groups: GroupThresholds,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::Gcl,
            retrain: true,
            stage1_iters: 3000,
            stage2_iters: 500,
            batch_size: 64,
            lr: 0.1,
            momentum: 0.9,
            milestones: vec![0.6, 0.8],
            lr_decay: 0.1,
            mixup_alpha: None,
            hidden: vec![64, 64],
            embedding_dim: 16,
            seed: 0,
            sampler: SamplerSpec::default(),
            gcl: GclConfig::default(),
            groups: GroupThresholds::default(),
        }
    }
}

impl TrainConfig {
    /// Plain cross-entropy, representation stage only.
    pub fn ce_baseline() -> Self {
        TrainConfig {
            method: Method::Ce,
            retrain: false,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("train.lr must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("train.momentum must be in [0, 1), got {}", self.momentum)));
        }
        if self.milestones.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::Config("train.milestones must be fractions in [0, 1]".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay.is_finite()) {
            return Err(Error::Config("train.lr_decay must be > 0".into()));
        }
        if let Some(a) = self.mixup_alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("train.mixup_alpha must be > 0, got {a}")));
            }
        }
        if self.embedding_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Config("model widths must be >= 1".into()));
        }
        if self.groups.few_below > self.groups.many_above + 1 {
            return Err(Error::Config("group thresholds overlap".into()));
        }
        self.sampler.validate()?;
        self.gcl.validate()
    }

    /// Learning rate at 0-based iteration `iter` of a stage `len` long.
    pub fn lr_at(&self, iter: usize, len: usize) -> f64 {
        let passed = self
            .milestones
            .iter()
            .filter(|&&m| iter >= (m * len as f64).round() as usize)
            .count();
        self.lr * self.lr_decay.powi(passed as i32)
    }

    /// Layer widths from `input_dim` through the embedding.
    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = vec![input_dim];
        dims.extend(&self.hidden);
        dims.push(self.embedding_dim);
        dims
    }

    /// Stable fingerprint of every field, stored in checkpoints.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(format!("{self:?}").as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multistep_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at(0, 100), 0.1);
        assert_eq!(cfg.lr_at(59, 100), 0.1);
        assert!((cfg.lr_at(60, 100) - 0.01).abs() < 1e-15);
        assert!((cfg.lr_at(80, 100) - 0.001).abs() < 1e-15);
        assert!((cfg.lr_at(99, 100) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn fingerprint_tracks_fields() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.lr = 0.05;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { mixup_alpha: Some(0.0), ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { milestones: vec![1.5], ..TrainConfig::default() }.validate().is_err());
    }
}
