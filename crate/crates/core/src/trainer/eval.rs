use std::fmt;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gcl::{eval_logits, CloudSizeTable, GclConfig};
use crate::model::{HeadKind, Model};

use super::GroupThresholds;

/// Shot-count bucket of a class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Many,
    Medium,
    Few,
}

impl Group {
    pub fn of(train_count: usize, t: &GroupThresholds) -> Group {
        if train_count > t.many_above {
            Group::Many
        } else if train_count < t.few_below {
            Group::Few
        } else {
            Group::Medium
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::Many => "many",
            Group::Medium => "medium",
            Group::Few => "few",
        }
    }
}

/// Mean per-class accuracy for each group; `None` when a group has no
/// classes with test samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupAccuracy {
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
}

impl GroupAccuracy {
    pub fn get(&self, g: Group) -> Option<f64> {
        match g {
            Group::Many => self.many,
            Group::Medium => self.medium,
            Group::Few => self.few,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub top1: f64,
    /// Recall per class; NaN for classes absent from the test set.
    pub per_class_acc: Vec<f64>,
    pub group_acc: GroupAccuracy,
    /// `confusion[true][pred]`.
    pub confusion: Vec<Vec<u64>>,
    pub train_counts: Vec<usize>,
    pub groups: Vec<Group>,
}

impl EvalReport {
    pub fn classes(&self) -> usize {
        self.per_class_acc.len()
    }

    pub fn test_counts(&self) -> Vec<u64> {
        self.confusion.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn correct(&self) -> Vec<u64> {
        (0..self.classes()).map(|j| self.confusion[j][j]).collect()
    }

    /// Unweighted mean of per-class accuracies over classes with test data.
    pub fn mean_class_acc(&self) -> f64 {
        let present: Vec<f64> = self.per_class_acc.iter().copied().filter(|a| !a.is_nan()).collect();
        present.iter().sum::<f64>() / present.len() as f64
    }

    /// CSV with header `class,train_count,group,test_count,correct,accuracy`.
    pub fn per_class_csv(&self) -> String {
        let mut out = String::from("class,train_count,group,test_count,correct,accuracy\n");
        let tc = self.test_counts();
        for j in 0..self.classes() {
            let acc = if self.per_class_acc[j].is_nan() {
                String::new()
            } else {
                self.per_class_acc[j].to_string()
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                j,
                self.train_counts[j],
                self.groups[j].name(),
                tc[j],
                self.confusion[j][j],
                acc
            ));
        }
        out
    }

    /// CSV with header `metric,value`; absent groups are left empty.
    pub fn summary_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "metric,value\ntop1,{}\nmany,{}\nmedium,{}\nfew,{}\n",
            self.top1,
            opt(self.group_acc.many),
            opt(self.group_acc.medium),
            opt(self.group_acc.few)
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| match v {
            Some(x) => format!("{:6.2}%", 100.0 * x),
            None => "     -".to_string(),
        };
        writeln!(f, "top-1  {}", pct(Some(self.top1)))?;
        writeln!(f, "many   {}", pct(self.group_acc.many))?;
        writeln!(f, "medium {}", pct(self.group_acc.medium))?;
        writeln!(f, "few    {}", pct(self.group_acc.few))?;
        writeln!(f, "class  train  group   test  acc")?;
        let tc = self.test_counts();
        for j in 0..self.classes() {
            let acc = if self.per_class_acc[j].is_nan() { None } else { Some(self.per_class_acc[j]) };
            writeln!(
                f,
                "{:>5}  {:>5}  {:<6} {:>5}  {}",
                j,
                self.train_counts[j],
                self.groups[j].name(),
                tc[j],
                pct(acc)
            )?;
        }
        Ok(())
    }
}

/// Builds a report from predicted and true labels. Groups are keyed by
/// `train_counts`, one entry per class.
pub fn evaluate_predictions(
    preds: &[usize],
    labels: &[usize],
    train_counts: &[usize],
    thresholds: &GroupThresholds,
) -> Result<EvalReport> {
    if preds.len() != labels.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::Data("test set is empty".into()));
    }
    let c = train_counts.len();
    if let Some(&bad) = preds.iter().chain(labels).find(|&&v| v >= c) {
        return Err(Error::Shape(format!("class {bad} out of range for {c} classes")));
    }
    let mut confusion = vec![vec![0u64; c]; c];
    for (&p, &y) in preds.iter().zip(labels) {
        confusion[y][p] += 1;
    }
    let mut correct_total = 0u64;
    let per_class_acc: Vec<f64> = (0..c)
        .map(|j| {
            let n: u64 = confusion[j].iter().sum();
            correct_total += confusion[j][j];
            if n == 0 {
                f64::NAN
            } else {
                confusion[j][j] as f64 / n as f64
            }
        })
        .collect();
    let groups: Vec<Group> = train_counts.iter().map(|&n| Group::of(n, thresholds)).collect();
    let group_mean = |g: Group| {
        let accs: Vec<f64> = (0..c)
            .filter(|&j| groups[j] == g && !per_class_acc[j].is_nan())
            .map(|j| per_class_acc[j])
            .collect();
        (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
    };
    Ok(EvalReport {
        top1: correct_total as f64 / labels.len() as f64,
        group_acc: GroupAccuracy {
            many: group_mean(Group::Many),
            medium: group_mean(Group::Medium),
            few: group_mean(Group::Few),
        },
        per_class_acc,
        confusion,
        train_counts: train_counts.to_vec(),
        groups,
    })
}

/// Predicted classes. Cosine heads go through the noise-free evaluation
/// logits; linear heads use raw logits.
pub fn predict(model: &Model, data: &Dataset, gcl: &GclConfig) -> Result<Vec<usize>> {
    let z = model.logits(data.features())?;
    match model.head_kind() {
        HeadKind::Cosine => Ok(eval_logits(&z, &CloudSizeTable::zeros(z.cols()), gcl)?.argmax_rows()),
        HeadKind::Linear => Ok(z.argmax_rows()),
    }
}

pub fn evaluate(
    model: &Model,
    test: &Dataset,
    train_counts: &[usize],
    thresholds: &GroupThresholds,
    gcl: &GclConfig,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Data("test set is empty".into()));
    }
    if train_counts.len() != model.classes() {
        return Err(Error::Shape(format!(
            "{} training counts for a {}-class model",
            train_counts.len(),
            model.classes()
        )));
    }
    evaluate_predictions(&predict(model, test, gcl)?, test.labels(), train_counts, thresholds)
}
