//! Long-tailed datasets: count profiles, synthetic blobs and CSV files.

mod csvio;
mod longtail;
mod synth;

pub use csvio::{load_csv, load_csv_with_classes, read_csv, save_csv, write_csv};
pub use longtail::{imbalance_ratio, longtail_counts, LongTailSpec};
pub use synth::{balanced_test_split, synth_blobs, BlobGenerator, BlobSpec};

use crate::error::{Error, Result};
use crate::numerics::Tensor2;

/// Feature matrix with integer labels and the per-class histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    features: Tensor2,
    labels: Vec<usize>,
    counts: Vec<usize>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Tensor2, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        let mut counts = vec![0; classes];
        for (i, &y) in labels.iter().enumerate() {
            if y >= classes {
                return Err(Error::Data(format!(
                    "sample {i} has label {y}, expected < {classes}"
                )));
            }
            counts[y] += 1;
        }
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
            counts,
        })
    }

    pub fn features(&self) -> &Tensor2 {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows and labels at `indices`, in order.
    pub fn batch(&self, indices: &[usize]) -> (Tensor2, Vec<usize>) {
        let x = self.features.gather_rows(indices);
        let y = indices.iter().map(|&i| self.labels[i]).collect();
        (x, y)
    }

    /// Plain-text summary: sizes, per-class counts and imbalance ratio.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "dataset: {}\nsamples: {}\nclasses: {}\nfeatures: {}\n",
            self.name,
            self.len(),
            self.classes(),
            self.dim()
        );
        match imbalance_ratio(self) {
            Ok(g) => s.push_str(&format!("imbalance ratio: {g}\n")),
            Err(_) => s.push_str("imbalance ratio: undefined (empty class)\n"),
        }
        s.push_str("class,count\n");
        for (j, n) in self.counts.iter().enumerate() {
            s.push_str(&format!("{j},{n}\n"));
        }
        s
    }
}
