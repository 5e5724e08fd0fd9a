use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gcl::{
    ce_loss, ce_loss_soft, compute_cloud_sizes, gcl_loss, gcl_loss_soft, mixup_batch, one_hot,
    sample_epsilon, CloudSizeTable, LossOutput,
};
use crate::model::Model;
use crate::numerics::{RngStream, SgdState, Tensor2};
use crate::sampler::{class_pools, class_probs, draw_batch, ClassProbTable};

use super::{Method, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Per-iteration loss record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossTrace {
    pub rows: Vec<TraceRow>,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }

    pub fn extend(&mut self, other: LossTrace) {
        self.rows.extend(other.rows);
    }

    /// CSV with header `iteration,lr,loss`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,lr,loss\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.iteration, r.lr, r.loss));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Stage1Output {
    pub trace: LossTrace,
    pub optimizer: SgdState,
    pub cloud: CloudSizeTable,
}

#[derive(Clone, Debug)]
pub struct Stage2Output {
    pub trace: LossTrace,
    pub optimizer: SgdState,
    pub probs: ClassProbTable,
    /// How many re-training samples were drawn from each class.
    pub drawn_per_class: Vec<u64>,
}

/// Cloud table for `method`: real cloud sizes for GCL, zeros otherwise.
fn cloud_for(dataset: &Dataset, cfg: &TrainConfig) -> Result<CloudSizeTable> {
    match cfg.method {
        Method::Gcl => compute_cloud_sizes(dataset.counts(), cfg.gcl.strategy),
        Method::Ce => Ok(CloudSizeTable::zeros(dataset.classes())),
    }
}

enum Batch<'a> {
    Hard(&'a [usize]),
    Soft(&'a Tensor2),
}

fn batch_loss(
    logits: &Tensor2,
    targets: Batch<'_>,
    cloud: &CloudSizeTable,
    noise: &mut RngStream,
    cfg: &TrainConfig,
) -> Result<LossOutput> {
    match cfg.method {
        Method::Gcl => {
            let eps: Vec<f64> = (0..logits.rows()).map(|_| sample_epsilon(noise, &cfg.gcl)).collect();
            match targets {
                Batch::Hard(y) => gcl_loss(logits, y, cloud, &eps, &cfg.gcl),
                Batch::Soft(t) => gcl_loss_soft(logits, t, cloud, &eps, &cfg.gcl),
            }
        }
        Method::Ce => match targets {
            Batch::Hard(y) => ce_loss(logits, y),
            Batch::Soft(t) => ce_loss_soft(logits, t),
        },
    }
}

fn check_loss(out: Result<LossOutput>, iteration: usize) -> Result<LossOutput> {
    match out {
        Ok(o) if o.loss.is_finite() => Ok(o),
        Ok(o) => Err(Error::Divergence { iteration, loss: o.loss }),
        Err(e) => Err(diverged(e, iteration)),
    }
}

/// Non-finite values anywhere in an iteration mean the run blew up.
fn diverged(e: Error, iteration: usize) -> Error {
    match e {
        Error::Domain(_) => Error::Divergence {
            iteration,
            loss: f64::NAN,
        },
        e => e,
    }
}

/// Representation learning: instance-balanced batches (uniform over all
/// samples, with replacement), every parameter updated.
pub fn train_stage1(dataset: &Dataset, model: &mut Model, cfg: &TrainConfig, rng: &RngStream) -> Result<Stage1Output> {
    cfg.validate()?;
    if model.head_kind() != cfg.method.head_kind() {
        return Err(Error::Config(format!(
            "method {} needs a {:?} head",
            cfg.method,
            cfg.method.head_kind()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let cloud = cloud_for(dataset, cfg)?;
    let mut batching = rng.child("stage1-batches");
    let mut noise = rng.child("stage1-noise");
    let mut mixing = rng.child("stage1-mixup");
    let mut opt = SgdState::new(cfg.lr, cfg.momentum)?;
    let mut trace = LossTrace::default();
    let n = dataset.len();
    for it in 0..cfg.stage1_iters {
        let iteration = it + 1;
        let idx: Vec<usize> = (0..cfg.batch_size).map(|_| batching.index(n)).collect();
        let (x, y) = dataset.batch(&idx);
        let (out, tape) = match cfg.mixup_alpha {
            Some(alpha) => {
                let mixed = mixup_batch(&mut mixing, &x, &one_hot(&y, dataset.classes()), alpha)?;
                let (logits, tape) = model.forward(&mixed.x).map_err(|e| diverged(e, iteration))?;
                let out = batch_loss(&logits, Batch::Soft(&mixed.targets), &cloud, &mut noise, cfg);
                (check_loss(out, iteration)?, tape)
            }
            None => {
                let (logits, tape) = model.forward(&x).map_err(|e| diverged(e, iteration))?;
                let out = batch_loss(&logits, Batch::Hard(&y), &cloud, &mut noise, cfg);
                (check_loss(out, iteration)?, tape)
            }
        };
        let grads = model.backward(&tape, &out.grad).map_err(|e| diverged(e, iteration))?;
        opt.lr = cfg.lr_at(it, cfg.stage1_iters);
        opt.step(&mut model.params_mut(), &grads.slices())?;
        trace.rows.push(TraceRow {
            iteration,
            lr: opt.lr,
            loss: out.loss,
        });
    }
    Ok(Stage1Output {
        trace,
        optimizer: opt,
        cloud,
    })
}

/// Classifier re-training with the backbone frozen. Batches are drawn with
/// the configured sampler; the loss is the same as in stage 1. Trace
/// iterations continue after `cfg.stage1_iters`.
pub fn train_stage2_crt(dataset: &Dataset, model: &mut Model, cfg: &TrainConfig, rng: &RngStream) -> Result<Stage2Output> {
    cfg.validate()?;
    if model.head_kind() != cfg.method.head_kind() {
        return Err(Error::Config(format!("method {} does not match the model head", cfg.method)));
    }
    let cloud = cloud_for(dataset, cfg)?;
    let spec_cloud = compute_cloud_sizes(dataset.counts(), cfg.gcl.strategy)?;
    let probs = class_probs(dataset.counts(), &spec_cloud, &cfg.sampler)?;
    let pools = class_pools(dataset.labels(), dataset.classes());
    let mut batching = rng.child("stage2-batches");
    let mut noise = rng.child("stage2-noise");
    let mut opt = SgdState::new(cfg.lr, cfg.momentum)?;
    let mut trace = LossTrace::default();
    let mut drawn_per_class = vec![0u64; dataset.classes()];
    if cfg.stage2_iters == 0 {
        return Ok(Stage2Output {
            trace,
            optimizer: opt,
            probs,
            drawn_per_class,
        });
    }
    // Each feature row depends only on its own input row, so caching the
    // frozen features is bit-identical to recomputing them per batch.
    let (features, _) = model.forward_features(dataset.features())?;
    for it in 0..cfg.stage2_iters {
        let iteration = cfg.stage1_iters + it + 1;
        let idx = draw_batch(&mut batching, &probs, &pools, cfg.batch_size)?;
        let y: Vec<usize> = idx.iter().map(|&i| dataset.labels()[i]).collect();
        for &c in &y {
            drawn_per_class[c] += 1;
        }
        let f = features.gather_rows(&idx);
        let (logits, tape) = model.head.forward(&f).map_err(|e| diverged(e, iteration))?;
        let out = check_loss(batch_loss(&logits, Batch::Hard(&y), &cloud, &mut noise, cfg), iteration)?;
        let grad = model.backward_head(&tape, &out.grad).map_err(|e| diverged(e, iteration))?;
        opt.lr = cfg.lr_at(it, cfg.stage2_iters);
        opt.step(&mut model.head_params_mut(), &grad.slices())?;
        trace.rows.push(TraceRow {
            iteration,
            lr: opt.lr,
            loss: out.loss,
        });
    }
    Ok(Stage2Output {
        trace,
        optimizer: opt,
        probs,
        drawn_per_class,
    })
}
