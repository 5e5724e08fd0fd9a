use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor2};

use super::Dataset;

/// Isotropic Gaussian blobs, one per class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    /// Std of the Gaussian the class centers are drawn from.
    pub center_scale: f64,
    /// Std of the per-sample noise around a center.
    pub noise_std: f64,
}

#[derive(Clone, Debug)]
pub struct BlobGenerator {
    centers: Tensor2,
    noise_std: f64,
}

impl BlobGenerator {
    pub fn new(rng: &mut RngStream, spec: &BlobSpec) -> Result<Self> {
        if spec.dim < 2 || spec.classes < 2 {
            return Err(Error::Domain(format!(
                "blobs need dim >= 2 and at least 2 classes, got {spec:?}"
            )));
        }
        if !(spec.noise_std >= 0.0 && spec.center_scale >= 0.0) {
            return Err(Error::Domain("blob scales must be >= 0".into()));
        }
        let data = (0..spec.classes * spec.dim)
            .map(|_| spec.center_scale * rng.standard_normal())
            .collect();
        Ok(BlobGenerator {
            centers: Tensor2::from_vec(spec.classes, spec.dim, data)?,
            noise_std: spec.noise_std,
        })
    }

    pub fn centers(&self) -> &Tensor2 {
        &self.centers
    }

    /// Exactly `counts[j]` samples of class `j`, grouped by class.
    pub fn sample(&self, rng: &mut RngStream, counts: &[usize], name: &str) -> Result<Dataset> {
        if counts.len() != self.centers.rows() {
            return Err(Error::Shape(format!(
                "{} counts for {} classes",
                counts.len(),
                self.centers.rows()
            )));
        }
        let dim = self.centers.cols();
        let total: usize = counts.iter().sum();
        let mut data = Vec::with_capacity(total * dim);
        let mut labels = Vec::with_capacity(total);
        for (j, &n) in counts.iter().enumerate() {
            let center = self.centers.row(j);
            for _ in 0..n {
                data.extend(center.iter().map(|c| c + self.noise_std * rng.standard_normal()));
                labels.push(j);
            }
        }
        Dataset::new(name, Tensor2::from_vec(total, dim, data)?, labels, counts.len())
    }
}

/// Training blobs. Centers come from the `centers` child of `rng`, samples
/// from its `train` child.
pub fn synth_blobs(rng: &RngStream, spec: &BlobSpec, counts: &[usize]) -> Result<Dataset> {
    let gen = BlobGenerator::new(&mut rng.child("centers"), spec)?;
    gen.sample(&mut rng.child("train"), counts, "blobs-train")
}

/// Balanced test split with the same centers as [`synth_blobs`] and a
/// disjoint sample stream.
pub fn balanced_test_split(rng: &RngStream, spec: &BlobSpec, per_class: usize) -> Result<Dataset> {
    let gen = BlobGenerator::new(&mut rng.child("centers"), spec)?;
    gen.sample(&mut rng.child("test"), &vec![per_class; spec.classes], "blobs-test")
}
