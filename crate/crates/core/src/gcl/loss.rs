use crate::error::{Error, Result};
use crate::numerics::{gaussian_draw, softmax_row, RngStream, Tensor2};

use super::{CloudSizeTable, CloudStrategy};

/// Slack allowed on cosine logits outside `[-1, 1]`.
const COSINE_SLACK: f64 = 1e-12;

/// GCL loss hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GclConfig {
    /// Logit scale `s`.
    pub scale: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    pub strategy: CloudStrategy,
}

impl Default for GclConfig {
    fn default() -> Self {
        GclConfig {
            scale: 30.0,
            noise_mean: 0.0,
            noise_std: 1.0 / 3.0,
            clamp_lo: -1.0,
            clamp_hi: 1.0,
            strategy: CloudStrategy::LogDiff,
        }
    }
}

impl GclConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!("gcl.scale must be > 0, got {}", self.scale)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) || !self.noise_mean.is_finite() {
            return Err(Error::Config("gcl noise parameters must be finite, std >= 0".into()));
        }
        if !(self.clamp_lo < self.clamp_hi) {
            return Err(Error::Config(format!(
                "gcl clamp bounds must satisfy lo < hi, got [{}, {}]",
                self.clamp_lo, self.clamp_hi
            )));
        }
        Ok(())
    }
}

/// Output of a softmax cross-entropy style loss.
#[derive(Clone, Debug)]
pub struct LossOutput {
    /// Mean loss over the batch.
    pub loss: f64,
    /// Gradient of `loss` with respect to the input logits (`z~` for GCL).
    pub grad: Tensor2,
    /// Row-wise softmax of the (clouded) logits.
    pub probs: Tensor2,
}

/// Draws the nonnegative perturbation magnitude `|clamp(g)|`, `g ~ N(mean, std^2)`.
pub fn sample_epsilon(rng: &mut RngStream, cfg: &GclConfig) -> f64 {
    gaussian_draw(rng, cfg.noise_mean, cfg.noise_std)
        .clamp(cfg.clamp_lo, cfg.clamp_hi)
        .abs()
}

fn check_cosine(z: &Tensor2, table: &CloudSizeTable) -> Result<()> {
    if table.classes() != z.cols() {
        return Err(Error::Shape(format!(
            "cloud table has {} classes, logits have {}",
            table.classes(),
            z.cols()
        )));
    }
    if let Some(v) = z.data().iter().find(|v| v.abs() > 1.0 + COSINE_SLACK) {
        return Err(Error::Contract(format!("cosine logit {v} outside [-1, 1]")));
    }
    Ok(())
}

/// `s * (z~[i][j] - delta_j * eps[i])`, one shared magnitude per sample.
pub fn clouded_logits(
    z: &Tensor2,
    table: &CloudSizeTable,
    eps: &[f64],
    cfg: &GclConfig,
) -> Result<Tensor2> {
    check_cosine(z, table)?;
    if eps.len() != z.rows() {
        return Err(Error::Shape(format!(
            "{} perturbations for a batch of {}",
            eps.len(),
            z.rows()
        )));
    }
    if let Some(e) = eps.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::Contract(format!("perturbation magnitude must be >= 0, got {e}")));
    }
    let delta = table.normalized().data();
    let mut out = z.clone();
    for (i, &e) in eps.iter().enumerate() {
        for (v, d) in out.row_mut(i).iter_mut().zip(delta) {
            *v = cfg.scale * (*v - d * e);
        }
    }
    Ok(out)
}

/// Inference logits: no perturbation, no margin, `s * z~`.
pub fn eval_logits(z: &Tensor2, table: &CloudSizeTable, cfg: &GclConfig) -> Result<Tensor2> {
    check_cosine(z, table)?;
    Ok(z.scale(cfg.scale))
}

enum Targets<'a> {
    Hard(&'a [usize]),
    Soft(&'a Tensor2),
}

/// `logsumexp(z) = max + tail`, with `tail = ln(1 + sum of the other
/// exp(z_j - max))` kept separate so that `-log p_y` does not cancel when
/// the target dominates.
fn log_partition(z: &[f64]) -> (f64, f64) {
    let (top, max) = z
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
    let rest: f64 = z
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != top)
        .map(|(_, &v)| (v - max).exp())
        .sum();
    (max, rest.ln_1p())
}

/// Mean softmax cross-entropy of `logits`; the returned gradient is with
/// respect to `logits` scaled by `chain` (`ds/dz~` for GCL, 1 for CE).
fn softmax_xent(logits: &Tensor2, targets: Targets<'_>, chain: f64) -> Result<LossOutput> {
    let (b, c) = logits.shape();
    if b == 0 {
        return Err(Error::Domain("empty batch".into()));
    }
    match targets {
        Targets::Hard(labels) => {
            if labels.len() != b {
                return Err(Error::Shape(format!("{} labels for a batch of {b}", labels.len())));
            }
            if let Some(&y) = labels.iter().find(|&&y| y >= c) {
                return Err(Error::Domain(format!("label {y} out of range for {c} classes")));
            }
        }
        Targets::Soft(t) => {
            if t.shape() != (b, c) {
                return Err(Error::Shape(format!(
                    "soft targets {:?} vs logits {:?}",
                    t.shape(),
                    (b, c)
                )));
            }
        }
    }
    let mut probs = Tensor2::zeros(b, c);
    let mut grad = Tensor2::zeros(b, c);
    let mut total = 0.0;
    let k = chain / b as f64;
    for i in 0..b {
        let z = logits.row(i);
        softmax_row(z, probs.row_mut(i));
        let (max, tail) = log_partition(z);
        let p = probs.row(i);
        let g = grad.row_mut(i);
        match &targets {
            Targets::Hard(labels) => {
                let y = labels[i];
                total += (max - z[y]) + tail;
                // p_y - 1 is formed as minus the other probabilities, which
                // keeps precision when p_y rounds close to 1.
                let others: f64 = p.iter().enumerate().filter(|&(j, _)| j != y).map(|(_, &pj)| pj).sum();
                for (j, (gj, &pj)) in g.iter_mut().zip(p).enumerate() {
                    *gj = if j == y { -k * others } else { k * pj };
                }
            }
            Targets::Soft(t) => {
                let t = t.row(i);
                let mass: f64 = t.iter().sum();
                total += t.iter().zip(z).map(|(tj, zj)| tj * ((max - zj) + tail)).sum::<f64>();
                let p_total: f64 = p.iter().sum();
                // mass * p_j - t_j, rearranged as in the hard-label case.
                for ((gj, &pj), &tj) in g.iter_mut().zip(p).zip(t) {
                    *gj = k * (pj * (mass - tj) - tj * (p_total - pj));
                }
            }
        }
    }
    let loss = total / b as f64;
    if !loss.is_finite() {
        return Err(Error::Domain(format!("loss is not finite ({loss})")));
    }
    Ok(LossOutput { loss, grad, probs })
}

/// GCL loss on cosine logits with hard labels. `eps` and the cloud sizes
/// are treated as constants in the gradient.
pub fn gcl_loss(
    z: &Tensor2,
    labels: &[usize],
    table: &CloudSizeTable,
    eps: &[f64],
    cfg: &GclConfig,
) -> Result<LossOutput> {
    let clouded = clouded_logits(z, table, eps, cfg)?;
    softmax_xent(&clouded, Targets::Hard(labels), cfg.scale)
}

/// GCL loss against soft (e.g. mixup) targets.
pub fn gcl_loss_soft(
    z: &Tensor2,
    targets: &Tensor2,
    table: &CloudSizeTable,
    eps: &[f64],
    cfg: &GclConfig,
) -> Result<LossOutput> {
    let clouded = clouded_logits(z, table, eps, cfg)?;
    softmax_xent(&clouded, Targets::Soft(targets), cfg.scale)
}

/// Plain softmax cross-entropy on raw logits.
pub fn ce_loss(z: &Tensor2, labels: &[usize]) -> Result<LossOutput> {
    softmax_xent(z, Targets::Hard(labels), 1.0)
}

pub fn ce_loss_soft(z: &Tensor2, targets: &Tensor2) -> Result<LossOutput> {
    softmax_xent(z, Targets::Soft(targets), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcl::compute_cloud_sizes;
    use crate::numerics::{finite_diff_grad, relative_error, Tensor1};

    fn t2<R: AsRef<[f64]>>(rows: &[R]) -> Tensor2 {
        Tensor2::from_rows(rows).unwrap()
    }

    fn table_with(normalized: &[f64]) -> CloudSizeTable {
        // counts chosen so that log-diff normalizes to `normalized` for [0, 1]
        assert_eq!(normalized, &[0.0, 1.0]);
        compute_cloud_sizes(&[10, 1], CloudStrategy::LogDiff).unwrap()
    }

    fn cfg(scale: f64) -> GclConfig {
        GclConfig {
            scale,
            ..GclConfig::default()
        }
    }

    #[test]
    fn epsilon_degenerate_and_bounded() {
        let mut rng = RngStream::new(0);
        let off = GclConfig {
            noise_std: 0.0,
            ..GclConfig::default()
        };
        assert_eq!(sample_epsilon(&mut rng, &off), 0.0);
        let wide = GclConfig {
            noise_std: 10.0,
            ..GclConfig::default()
        };
        for _ in 0..10_000 {
            let e = sample_epsilon(&mut rng, &wide);
            assert!((0.0..=1.0).contains(&e));
        }
    }

    #[test]
    fn epsilon_half_normal_mean() {
        let mut rng = RngStream::new(77);
        let c = GclConfig::default();
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_epsilon(&mut rng, &c)).sum::<f64>() / n as f64;
        let expected = (1.0 / 3.0) * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - expected).abs() < 0.002, "{mean} vs {expected}");
    }

    #[test]
    fn clouded_logits_examples() {
        let table = table_with(&[0.0, 1.0]);
        let z = t2(&[[0.5, 0.5]]);
        let out = clouded_logits(&z, &table, &[0.3], &cfg(30.0)).unwrap();
        assert!((out.get(0, 0) - 15.0).abs() < 1e-12);
        assert!((out.get(0, 1) - 6.0).abs() < 1e-12);

        let out = clouded_logits(&z, &table, &[0.0], &cfg(30.0)).unwrap();
        assert_eq!(out, z.scale(30.0));

        let flat = CloudSizeTable::zeros(2);
        let out = clouded_logits(&z, &flat, &[0.9], &cfg(30.0)).unwrap();
        assert_eq!(out, z.scale(30.0));
    }

    #[test]
    fn clouded_logits_contract_errors() {
        let table = CloudSizeTable::zeros(2);
        let z = t2(&[[0.5, 0.5]]);
        assert!(matches!(
            clouded_logits(&z, &table, &[-0.1], &cfg(1.0)),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            clouded_logits(&t2(&[[1.5, 0.0]]), &table, &[0.0], &cfg(1.0)),
            Err(Error::Contract(_))
        ));
        assert!(clouded_logits(&z, &CloudSizeTable::zeros(3), &[0.0], &cfg(1.0)).is_err());
    }

    #[test]
    fn binary_closed_form() {
        let out = gcl_loss(
            &t2(&[[1.0, -1.0]]),
            &[0],
            &CloudSizeTable::zeros(2),
            &[0.7],
            &cfg(1.0),
        )
        .unwrap();
        assert!((out.loss - 0.126928011042972).abs() < 1e-12);
    }

    #[test]
    fn clouded_tail_target() {
        let out = gcl_loss(&t2(&[[0.5, 0.5]]), &[1], &table_with(&[0.0, 1.0]), &[0.3], &cfg(30.0)).unwrap();
        // ln(1 + e^9)
        assert!((out.loss - 9.000123402189724).abs() < 1e-9);
    }

    #[test]
    fn uniform_logits() {
        let c = 4;
        let z = Tensor2::zeros(2, c);
        let out = gcl_loss(&z, &[1, 3], &CloudSizeTable::zeros(c), &[0.2, 0.4], &cfg(30.0)).unwrap();
        assert!((out.loss - (c as f64).ln()).abs() < 1e-12);
        let expected = 30.0 / 2.0 * (1.0 / c as f64 - 1.0);
        assert!((out.grad.get(0, 1) - expected).abs() < 1e-12);
        assert!((out.grad.get(1, 3) - expected).abs() < 1e-12);
    }

    #[test]
    fn bad_labels_rejected() {
        let z = Tensor2::zeros(1, 2);
        assert!(matches!(ce_loss(&z, &[2]), Err(Error::Domain(_))));
        assert!(ce_loss(&z, &[0, 1]).is_err());
    }

    #[test]
    fn ce_examples() {
        let out = ce_loss(&t2(&[[0.0, 0.0]]), &[0]).unwrap();
        assert!((out.loss - 2f64.ln()).abs() < 1e-15);
        let out = ce_loss(&t2(&[[3f64.ln(), 0.0]]), &[0]).unwrap();
        assert!((out.loss - 0.2876820724517809).abs() < 1e-12);
    }

    #[test]
    fn ce_gradient_matches_finite_differences() {
        let z = t2(&[[0.4, -1.3, 2.2], [0.0, 0.9, -0.5]]);
        let labels = [2, 0];
        let out = ce_loss(&z, &labels).unwrap();
        let x = Tensor1::from_vec(z.data().to_vec()).unwrap();
        let num = finite_diff_grad(
            |v| ce_loss(&Tensor2::from_vec(2, 3, v.to_vec()).unwrap(), &labels).unwrap().loss,
            &x,
            1e-6,
        )
        .unwrap();
        assert!(relative_error(out.grad.data(), num.data()) <= 1e-6);
    }

    #[test]
    fn soft_targets_match_hard_on_one_hot() {
        let z = t2(&[[0.2, -0.4, 0.9], [0.1, 0.3, -0.8]]);
        let labels = [1, 2];
        let onehot = crate::gcl::one_hot(&labels, 3);
        let table = compute_cloud_sizes(&[9, 3, 1], CloudStrategy::LogDiff).unwrap();
        let eps = [0.25, 0.5];
        let hard = gcl_loss(&z, &labels, &table, &eps, &cfg(16.0)).unwrap();
        let soft = gcl_loss_soft(&z, &onehot, &table, &eps, &cfg(16.0)).unwrap();
        assert!((hard.loss - soft.loss).abs() < 1e-12);
        assert!(relative_error(hard.grad.data(), soft.grad.data()) < 1e-14);
    }

    #[test]
    fn soft_target_gradient_matches_finite_differences() {
        let z = t2(&[[0.2, -0.4, 0.9], [0.1, 0.3, -0.8]]);
        let targets = t2(&[[0.3, 0.7, 0.0], [0.0, 0.45, 0.55]]);
        let table = compute_cloud_sizes(&[9, 3, 1], CloudStrategy::LogDiff).unwrap();
        let eps = [0.25, 0.5];
        let c = cfg(8.0);
        let out = gcl_loss_soft(&z, &targets, &table, &eps, &c).unwrap();
        let x = Tensor1::from_vec(z.data().to_vec()).unwrap();
        let num = finite_diff_grad(
            |v| {
                let z = Tensor2::from_vec(2, 3, v.to_vec()).unwrap();
                gcl_loss_soft(&z, &targets, &table, &eps, &c).unwrap().loss
            },
            &x,
            1e-6,
        )
        .unwrap();
        assert!(relative_error(out.grad.data(), num.data()) <= 1e-6);
    }

    #[test]
    fn eval_logits_is_plain_scaling() {
        let table = table_with(&[0.0, 1.0]);
        let z = t2(&[[0.9, 0.1]]);
        let out = eval_logits(&z, &table, &cfg(30.0)).unwrap();
        assert!((out.get(0, 0) - 27.0).abs() < 1e-12);
        assert!((out.get(0, 1) - 3.0).abs() < 1e-12);
        assert_eq!(out.argmax_rows(), z.argmax_rows());
        let flat = CloudSizeTable::zeros(2);
        assert_eq!(
            eval_logits(&z, &flat, &cfg(30.0)).unwrap(),
            clouded_logits(&z, &flat, &[0.0], &cfg(30.0)).unwrap()
        );
    }

    #[test]
    fn validate_rejects_bad_config() {
        assert!(GclConfig::default().validate().is_ok());
        let bad = GclConfig {
            clamp_lo: 1.0,
            clamp_hi: 1.0,
            ..GclConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(cfg(0.0).validate().is_err());
    }
}
