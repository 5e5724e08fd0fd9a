//! TOML run configuration. Every section and key is optional except
//! `data.train` and `data.test`; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcl::GclConfig;
use crate::sampler::SamplerSpec;
use crate::trainer::{GroupThresholds, TrainConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub data: DataSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub gcl: GclSection,
    #[serde(default)]
    pub sampler: SamplerSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train: PathBuf,
    pub test: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            out: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        ModelSection {
            hidden: t.hidden,
            embedding_dim: t.embedding_dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub method: String,
    pub retrain: bool,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub lr_milestones: Vec<f64>,
    pub lr_decay: f64,
    pub mixup: bool,
    pub mixup_alpha: f64,
    pub many_above: usize,
    pub few_below: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            method: t.method.to_string(),
            retrain: t.retrain,
            stage1_iters: t.stage1_iters,
            stage2_iters: t.stage2_iters,
            batch_size: t.batch_size,
            lr: t.lr,
            momentum: t.momentum,
            lr_milestones: t.milestones,
            lr_decay: t.lr_decay,
            mixup: false,
            mixup_alpha: 1.0,
            many_above: t.groups.many_above,
            few_below: t.groups.few_below,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GclSection {
    pub scale: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    pub strategy: String,
}

impl Default for GclSection {
    fn default() -> Self {
        let g = GclConfig::default();
        GclSection {
            scale: g.scale,
            noise_mean: g.noise_mean,
            noise_std: g.noise_std,
            clamp_lo: g.clamp_lo,
            clamp_hi: g.clamp_hi,
            strategy: g.strategy.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub strategy: String,
    pub a: f64,
    pub b: f64,
    pub en_beta: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let s = SamplerSpec::default();
        SamplerSection {
            strategy: s.strategy.to_string(),
            a: s.a,
            b: s.b,
            en_beta: s.en_beta,
        }
    }
}

impl RunFile {
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", source.display())))
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut file = RunFile::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        file.data.train = base.join(&file.data.train);
        file.data.test = base.join(&file.data.test);
        file.run.out = base.join(&file.run.out);
        Ok(file)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn gcl_config(&self) -> Result<GclConfig> {
        let g = &self.gcl;
        let cfg = GclConfig {
            scale: g.scale,
            noise_mean: g.noise_mean,
            noise_std: g.noise_std,
            clamp_lo: g.clamp_lo,
            clamp_hi: g.clamp_hi,
            strategy: g.strategy.parse().map_err(|e| field("gcl.strategy", e))?,
        };
        cfg.validate().map_err(|e| field("gcl", e))?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let t = &self.train;
        let s = &self.sampler;
        let cfg = TrainConfig {
            method: t.method.parse().map_err(|e| field("train.method", e))?,
            retrain: t.retrain,
            stage1_iters: t.stage1_iters,
            stage2_iters: t.stage2_iters,
            batch_size: t.batch_size,
            lr: t.lr,
            momentum: t.momentum,
            milestones: t.lr_milestones.clone(),
            lr_decay: t.lr_decay,
            mixup_alpha: t.mixup.then_some(t.mixup_alpha),
            hidden: self.model.hidden.clone(),
            embedding_dim: self.model.embedding_dim,
            seed: self.run.seed,
            sampler: SamplerSpec {
                strategy: s.strategy.parse().map_err(|e| field("sampler.strategy", e))?,
                a: s.a,
                b: s.b,
                en_beta: s.en_beta,
            },
            gcl: self.gcl_config()?,
            groups: GroupThresholds {
                many_above: t.many_above,
                few_below: t.few_below,
            },
        };
        cfg.validate().map_err(|e| field("config", e))?;
        Ok(cfg)
    }
}

fn field(name: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) if msg.contains(name) => Error::Config(msg),
        Error::Config(msg) | Error::Domain(msg) => Error::Config(format!("{name}: {msg}")),
        other => Error::Config(format!("{name}: {other}")),
    }
}
