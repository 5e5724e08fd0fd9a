use rand::seq::SliceRandom;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor2};

/// A mixed batch: `x = lambda * x_a + (1 - lambda) * x_b` with soft targets
/// mixed the same way. `partner[i]` is the row paired with row `i`.
#[derive(Clone, Debug)]
pub struct MixedBatch {
    pub x: Tensor2,
    pub targets: Tensor2,
    pub lambda: f64,
    pub partner: Vec<usize>,
}

pub fn one_hot(labels: &[usize], classes: usize) -> Tensor2 {
    let mut t = Tensor2::zeros(labels.len(), classes);
    for (i, &y) in labels.iter().enumerate() {
        t.set(i, y, 1.0);
    }
    t
}

/// Mixes with an explicit coefficient and pairing.
pub fn mix_with(x: &Tensor2, targets: &Tensor2, lambda: f64, partner: &[usize]) -> Result<MixedBatch> {
    if x.rows() != targets.rows() || partner.len() != x.rows() {
        return Err(Error::Shape(format!(
            "mixup: {} inputs, {} targets, {} partners",
            x.rows(),
            targets.rows(),
            partner.len()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("mixup coefficient {lambda} outside [0, 1]")));
    }
    let blend = |src: &Tensor2| {
        let mut out = src.clone();
        for (i, &j) in partner.iter().enumerate() {
            let other = src.row(j);
            for (v, &o) in out.row_mut(i).iter_mut().zip(other) {
                *v = lambda * *v + (1.0 - lambda) * o;
            }
        }
        out
    };
    Ok(MixedBatch {
        x: blend(x),
        targets: blend(targets),
        lambda,
        partner: partner.to_vec(),
    })
}

/// Draws `lambda ~ Beta(alpha, alpha)` and a random pairing, then mixes.
pub fn mixup_batch(rng: &mut RngStream, x: &Tensor2, targets: &Tensor2, alpha: f64) -> Result<MixedBatch> {
    let beta = Beta::new(alpha, alpha)
        .map_err(|e| Error::Domain(format!("mixup alpha {alpha}: {e}")))?;
    let lambda = beta.sample(rng);
    let mut partner: Vec<usize> = (0..x.rows()).collect();
    partner.shuffle(rng);
    mix_with(x, targets, lambda, &partner)
}
