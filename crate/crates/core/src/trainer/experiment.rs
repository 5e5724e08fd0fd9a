use std::fs;
use std::path::Path;

use crate::data::{balanced_test_split, longtail_counts, synth_blobs, BlobSpec, Dataset, LongTailSpec};
use crate::error::{Error, Result};
use crate::gcl::CloudSizeTable;
use crate::model::{Checkpoint, Model};
use crate::numerics::{RngStream, SgdState};
use crate::sampler::{diagnostics_csv, ClassProbTable};

use super::{evaluate, train_stage1, train_stage2_crt, EvalReport, LossTrace, TrainConfig};

/// Paired run: a baseline arm and a treatment arm trained on the same data.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub longtail: LongTailSpec,
    pub blobs: BlobSpec,
    pub test_per_class: usize,
    pub baseline: TrainConfig,
    pub treatment: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            longtail: LongTailSpec {
                head: 500,
                classes: 10,
                gamma: 100.0,
            },
            blobs: BlobSpec {
                classes: 10,
                dim: 32,
                center_scale: 0.45,
                noise_std: 1.0,
            },
            test_per_class: 200,
            baseline: TrainConfig::ce_baseline(),
            treatment: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.longtail.classes != self.blobs.classes {
            return Err(Error::Config(format!(
                "long-tail profile has {} classes but the blob spec has {}",
                self.longtail.classes, self.blobs.classes
            )));
        }
        if self.test_per_class == 0 {
            return Err(Error::Config("test_per_class must be >= 1".into()));
        }
        self.baseline.validate()?;
        self.treatment.validate()
    }
}

/// Everything one arm produces.
#[derive(Clone, Debug)]
pub struct ArmOutcome {
    pub config: TrainConfig,
    /// Model after representation learning.
    pub stage1_model: Model,
    pub stage1_optimizer: SgdState,
    /// Test report after representation learning.
    pub stage1_report: EvalReport,
    /// Final model (equal to `stage1_model` when re-training is off).
    pub model: Model,
    pub stage2_optimizer: Option<SgdState>,
    pub report: EvalReport,
    /// Stage-1 rows followed by stage-2 rows.
    pub trace: LossTrace,
    pub cloud: CloudSizeTable,
    pub sampler: Option<ClassProbTable>,
    /// Re-training draws per class.
    pub drawn_per_class: Vec<u64>,
}

impl ArmOutcome {
    pub fn final_iteration(&self) -> u64 {
        let stage2 = if self.config.retrain { self.config.stage2_iters } else { 0 };
        (self.config.stage1_iters + stage2) as u64
    }

    pub fn stage1_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.stage1_model.clone(),
            optimizer: Some(self.stage1_optimizer.clone()),
            iteration: self.config.stage1_iters as u64,
            config_hash: self.config.fingerprint(),
        }
    }

    pub fn final_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            optimizer: Some(self.stage2_optimizer.clone().unwrap_or_else(|| self.stage1_optimizer.clone())),
            iteration: self.final_iteration(),
            config_hash: self.config.fingerprint(),
        }
    }

    /// Sampler diagnostics with the realized re-training class frequencies.
    pub fn sampler_csv(&self) -> Option<String> {
        let probs = self.sampler.as_ref()?;
        let total: u64 = self.drawn_per_class.iter().sum();
        let empirical: Vec<f64> = self
            .drawn_per_class
            .iter()
            .map(|&d| if total == 0 { 0.0 } else { d as f64 / total as f64 })
            .collect();
        Some(diagnostics_csv(self.cloud.counts(), probs, &empirical))
    }

    /// Writes traces, reports, tables, embeddings and checkpoints into `dir`.
    pub fn write_artifacts(&self, dir: &Path, test: &Dataset) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, body: &str| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        put("loss_trace.csv", &self.trace.to_csv())?;
        put("stage1_report_per_class.csv", &self.stage1_report.per_class_csv())?;
        put("stage1_report_summary.csv", &self.stage1_report.summary_csv())?;
        put("report_per_class.csv", &self.report.per_class_csv())?;
        put("report_summary.csv", &self.report.summary_csv())?;
        put("report.txt", &self.report.to_string())?;
        put("cloud_sizes.csv", &self.cloud.to_csv())?;
        if let Some(csv) = self.sampler_csv() {
            put("sampler.csv", &csv)?;
        }
        put("embeddings.csv", &embeddings_csv(&self.model, test)?)?;
        self.stage1_checkpoint().save(&dir.join("stage1.ckpt"))?;
        self.final_checkpoint().save(&dir.join("final.ckpt"))
    }
}

/// Builds a model from `rng.child("init")` and runs both stages.
/// Batching and noise come from their own children of `rng`, so changing
/// the sampler never perturbs initialization.
pub fn run_arm(train: &Dataset, test: &Dataset, cfg: &TrainConfig, rng: &RngStream) -> Result<ArmOutcome> {
    cfg.validate()?;
    if train.classes() != test.classes() || train.dim() != test.dim() {
        return Err(Error::Data("train and test sets disagree on classes or dimension".into()));
    }
    let mut init = rng.child("init");
    let mut model = Model::new(&cfg.layer_dims(train.dim()), train.classes(), cfg.method.head_kind(), &mut init)?;
    let s1 = train_stage1(train, &mut model, cfg, rng)?;
    let stage1_report = evaluate(&model, test, train.counts(), &cfg.groups, &cfg.gcl)?;
    let stage1_model = model.clone();
    let mut trace = s1.trace;
    let (stage2_optimizer, sampler, drawn_per_class, report) = if cfg.retrain {
        let s2 = train_stage2_crt(train, &mut model, cfg, rng)?;
        trace.extend(s2.trace);
        let report = evaluate(&model, test, train.counts(), &cfg.groups, &cfg.gcl)?;
        (Some(s2.optimizer), Some(s2.probs), s2.drawn_per_class, report)
    } else {
        (None, None, vec![0; train.classes()], stage1_report.clone())
    };
    Ok(ArmOutcome {
        config: cfg.clone(),
        stage1_model,
        stage1_optimizer: s1.optimizer,
        stage1_report,
        model,
        stage2_optimizer,
        report,
        trace,
        cloud: s1.cloud,
        sampler,
        drawn_per_class,
    })
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub train: Dataset,
    pub test: Dataset,
    pub baseline: ArmOutcome,
    pub treatment: ArmOutcome,
}

impl ExperimentOutcome {
    /// Side-by-side `metric,baseline,treatment` CSV.
    pub fn comparison_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let (b, t) = (&self.baseline.report, &self.treatment.report);
        let (bs, ts) = (&self.baseline.stage1_report, &self.treatment.stage1_report);
        let mut out = String::from("metric,baseline,treatment\n");
        out.push_str(&format!("top1,{},{}\n", b.top1, t.top1));
        out.push_str(&format!("many,{},{}\n", opt(b.group_acc.many), opt(t.group_acc.many)));
        out.push_str(&format!("medium,{},{}\n", opt(b.group_acc.medium), opt(t.group_acc.medium)));
        out.push_str(&format!("few,{},{}\n", opt(b.group_acc.few), opt(t.group_acc.few)));
        out.push_str(&format!("stage1_top1,{},{}\n", bs.top1, ts.top1));
        out.push_str(&format!("stage1_few,{},{}\n", opt(bs.group_acc.few), opt(ts.group_acc.few)));
        out
    }

    /// `baseline/` and `treatment/` arm directories plus `comparison.csv`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        self.baseline.write_artifacts(&dir.join("baseline"), &self.test)?;
        self.treatment.write_artifacts(&dir.join("treatment"), &self.test)?;
        let p = dir.join("comparison.csv");
        fs::write(&p, self.comparison_csv()).map_err(|e| Error::io(&p, e))
    }
}

/// Generates the corpus from `seed`'s "data" stream, then trains both arms
/// from the same "train" stream so they differ only by configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed);
    let data = root.child("data");
    let counts = longtail_counts(&cfg.longtail)?;
    let train = synth_blobs(&data, &cfg.blobs, &counts)?;
    let test = balanced_test_split(&data, &cfg.blobs, cfg.test_per_class)?;
    let streams = root.child("train");
    let baseline = run_arm(&train, &test, &cfg.baseline, &streams)?;
    let treatment = run_arm(&train, &test, &cfg.treatment, &streams)?;
    Ok(ExperimentOutcome {
        train,
        test,
        baseline,
        treatment,
    })
}

/// Test-set embeddings as CSV: `e0..e{D-1},label`.
pub fn embeddings_csv(model: &Model, data: &Dataset) -> Result<String> {
    let (f, _) = model.forward_features(data.features())?;
    let mut out: String = (0..f.cols()).map(|j| format!("e{j},")).collect();
    out.push_str("label\n");
    for (i, &y) in data.labels().iter().enumerate() {
        for v in f.row(i) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{y}\n"));
    }
    Ok(out)
}
