use crate::error::{Error, Result};

use super::Dataset;

/// Exponential long-tail profile: class 0 is the head with `head` samples,
/// class `classes - 1` the tail with about `head / gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LongTailSpec {
    pub head: usize,
    pub classes: usize,
    pub gamma: f64,
}

/// `round(head * mu^i)` with `mu = gamma^(-1/(C-1))`, rounding half away
/// from zero and pinning class 0 to `head`.
pub fn longtail_counts(spec: &LongTailSpec) -> Result<Vec<usize>> {
    let LongTailSpec { head, classes, gamma } = *spec;
    if classes < 2 {
        return Err(Error::Domain(format!("need at least 2 classes, got {classes}")));
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("imbalance ratio must be >= 1, got {gamma}")));
    }
    let mu = gamma.powf(-1.0 / (classes - 1) as f64);
    let counts: Vec<usize> = (0..classes)
        .map(|i| {
            if i == 0 {
                head
            } else {
                (head as f64 * mu.powi(i as i32)).round() as usize
            }
        })
        .collect();
    if counts[classes - 1] == 0 {
        return Err(Error::Domain(format!(
            "tail class rounds to zero samples (head {head}, gamma {gamma})"
        )));
    }
    Ok(counts)
}

/// `max(n_j) / min(n_j)`.
pub fn imbalance_ratio(dataset: &Dataset) -> Result<f64> {
    let counts = dataset.counts();
    if let Some(j) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Domain(format!("class {j} is empty")));
    }
    let max = *counts.iter().max().ok_or_else(|| Error::Domain("no classes".into()))?;
    let min = *counts.iter().min().unwrap();
    Ok(max as f64 / min as f64)
}
